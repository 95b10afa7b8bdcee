#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "readmit/core.hpp"

using namespace readmit;

TEST_CASE("rng is reproducible and derived streams are independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    Rng base(7);
    Rng c1 = base.derive(1), c2 = base.derive(2);
    CHECK(c1.next() != c2.next());
    // deriving does not advance the parent
    Rng base2(7);
    CHECK(base.next() == base2.next());
}

TEST_CASE("rng u01 stays in [0,1) and uniform_index in range") {
    Rng r(3);
    for (int i = 0; i < 10000; ++i) {
        double u = r.u01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(r.uniform_index(7) < 7);
    }
}

TEST_CASE("shuffle is a permutation") {
    Rng r(11);
    std::vector<int> v{1, 2, 3, 4, 5, 6, 7, 8};
    auto orig = v;
    r.shuffle(v);
    std::sort(v.begin(), v.end());
    CHECK(v == orig);
}

TEST_CASE("matrix row/col selection") {
    Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
    std::vector<std::size_t> rows{2, 0};
    Matrix s = m.select_rows(rows);
    CHECK(s(0, 0) == 7);
    CHECK(s(1, 2) == 3);
    std::vector<std::size_t> cols{1};
    Matrix c = m.select_cols(cols);
    CHECK(c(2, 0) == 8);
}

TEST_CASE("median and mad") {
    std::vector<double> v{1, 2, 3, 4, 100};
    double med = stats::median(v);
    CHECK(med == 3.0);
    CHECK(stats::mad(v, med) == 1.0);
}

TEST_CASE("binomial tails") {
    // X ~ Bin(4, 1/2): P(X >= 4) = 1/16, P(X <= 0) = 1/16
    CHECK(stats::binom_tail_geq(4, 4) == doctest::Approx(1.0 / 16).epsilon(1e-12));
    CHECK(stats::binom_tail_leq(0, 4) == doctest::Approx(1.0 / 16).epsilon(1e-12));
    CHECK(stats::binom_two_sided_p(2, 4) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("hexfloat round trip is exact") {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) {
        double v = (r.u01() - 0.5) * std::pow(10.0, static_cast<double>(i % 60) - 30.0);
        CHECK(parse_double(to_hexfloat(v)) == v);
    }
}

TEST_CASE("kv file round trip and sections") {
    KvFile kv;
    kv.set("alpha", "1");
    kv.set("beta.gamma", "two words");
    kv.set("alpha", "3");  // overwrite keeps position
    std::string text = kv.to_string();
    CHECK(text == "alpha = 3\nbeta.gamma = two words\n");

    KvFile back = KvFile::parse(text);
    CHECK(back.get("alpha") == "3");
    CHECK(back.get("beta.gamma") == "two words");

    KvFile ini = KvFile::parse("[data]\ninput = a.csv\n# comment\n[split]\nratio = 0.7\n", true);
    CHECK(ini.get("data.input") == "a.csv");
    CHECK(ini.get_double("split.ratio") == doctest::Approx(0.7));

    CHECK_THROWS_AS(KvFile::parse("no equals sign here"), ParseError);
}

TEST_CASE("fnv1a64 checksum is stable") {
    CHECK(to_hex(fnv1a64("")) == "cbf29ce484222325");
    CHECK(fnv1a64("abc") != fnv1a64("abd"));
}
