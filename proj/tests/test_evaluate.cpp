#include <doctest.h>

#include "oracles.hpp"
#include "readmit/evaluate.hpp"

using namespace readmit;

TEST_CASE("confusion counts exactly") {
    std::vector<int> pred{1, 1, 0, 0, 1}, truth{1, 0, 0, 1, 1};
    auto cm = confusion(pred, truth);
    CHECK(cm.tp == 2);
    CHECK(cm.fp == 1);
    CHECK(cm.tn == 1);
    CHECK(cm.fn == 1);

    std::vector<int> ones(5, 1);
    auto all = confusion(ones, ones);
    CHECK(all.tp == 5);
    CHECK(all.fp + all.tn + all.fn == 0);

    std::vector<int> zeros(5, 0);
    auto inv = confusion(zeros, ones);
    CHECK(inv.tp == 0);
    CHECK(inv.tn == 0);
    CHECK(inv.fn == 5);

    std::vector<int> shorter(4, 0);
    CHECK_THROWS_AS(confusion(pred, shorter), Error);
}

TEST_CASE("classify thresholds with >= at the boundary") {
    std::vector<double> scores{0.5, 0.2, 0.9, 0.0};
    CHECK(classify(scores, 0.5) == std::vector<int>{1, 0, 1, 0});  // 0.5 >= 0.5 -> 1
    CHECK(classify(scores, 0.0) == std::vector<int>{1, 1, 1, 1});
    std::vector<double> below_one{0.3, 0.99, 0.7};
    CHECK(classify(below_one, 1.0) == std::vector<int>{0, 0, 0});
}

TEST_CASE("metrics formulas") {
    ConfusionMatrix cm{2, 1, 1, 1};
    auto r = metrics(cm);
    CHECK(*r.accuracy == doctest::Approx(0.6));
    CHECK(*r.sensitivity == doctest::Approx(2.0 / 3.0));
    CHECK(*r.specificity == doctest::Approx(0.5));
    CHECK(*r.precision == doctest::Approx(2.0 / 3.0));
    CHECK(*r.recall == *r.sensitivity);
}

TEST_CASE("perfect sensitivity when no false negatives") {
    ConfusionMatrix cm{4, 2, 3, 0};
    auto r = metrics(cm);
    CHECK(*r.sensitivity == 1.0);
}

TEST_CASE("zero denominators are flagged undefined") {
    ConfusionMatrix cm{0, 0, 5, 2};  // no positive predictions
    auto r = metrics(cm);
    CHECK_FALSE(r.precision.has_value());
    CHECK(r.accuracy.has_value());
    CHECK_FALSE(r.f1.has_value());
}

TEST_CASE("metrics match a brute-force element-count oracle on random vectors") {
    Rng rng(77);
    for (int rep = 0; rep < 200; ++rep) {
        std::size_t n = 50;
        std::vector<int> pred(n), truth(n);
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.u01() < 0.5;
            truth[i] = rng.u01() < 0.5;
        }
        auto r = metrics(confusion(pred, truth));
        std::size_t agree = 0;
        for (std::size_t i = 0; i < n; ++i) agree += pred[i] == truth[i];
        CHECK(*r.accuracy == static_cast<double>(agree) / static_cast<double>(n));
    }
}

TEST_CASE("sensitivity and specificity are order-invariant") {
    Rng rng(5);
    std::vector<int> pred(40), truth(40);
    for (std::size_t i = 0; i < 40; ++i) {
        pred[i] = rng.u01() < 0.4;
        truth[i] = rng.u01() < 0.5;
    }
    auto base = metrics(confusion(pred, truth));
    std::vector<std::size_t> perm(40);
    for (std::size_t i = 0; i < 40; ++i) perm[i] = i;
    rng.shuffle(perm);
    auto p2 = select(std::span<const int>(pred), perm);
    auto t2 = select(std::span<const int>(truth), perm);
    auto shuffled = metrics(confusion(p2, t2));
    CHECK(*base.sensitivity == *shuffled.sensitivity);
    CHECK(*base.specificity == *shuffled.specificity);
}

TEST_CASE("compare_sampling emits five metrics per strategy, deterministically") {
    auto [x, y] = oracles::two_gaussians(300, 3, 2.0, 15);
    // unbalance: drop most positives from the training half
    std::vector<std::size_t> train_idx, test_idx;
    std::size_t kept_pos = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (i % 3 == 0) {
            test_idx.push_back(i);
        } else if (y[i] == 0 || ++kept_pos % 5 == 0) {
            train_idx.push_back(i);
        }
    }
    Matrix xtr = x.select_rows(train_idx), xte = x.select_rows(test_idx);
    auto ytr = select(std::span<const int>(y), train_idx);
    auto yte = select(std::span<const int>(y), test_idx);

    std::vector<SamplingStrategy> strategies{SamplingStrategy::Undersample,
                                             SamplingStrategy::Undersample,
                                             SamplingStrategy::Rose};
    auto hp = Hyperparameters::defaults(ModelFamily::Cart);
    auto rows = compare_sampling(strategies, hp, xtr, ytr, xte, yte, 44);
    CHECK(rows.size() == 15);
    // identical strategy with identical seed gives identical rows
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(rows[i].metric == rows[i + 5].metric);
        CHECK(rows[i].value == rows[i + 5].value);
    }
    for (const auto& r : rows)
        if (r.value) {
            CHECK(*r.value >= 0.0);
            CHECK(*r.value <= 1.0);
        }
}

TEST_CASE("interaction means match a group-by oracle on a hand-built table") {
    Matrix x = Matrix::from_rows({
        {0, 0}, {0, 0}, {0, 1}, {0, 1}, {1, 0}, {1, 0}, {1, 1}, {1, 1}});
    std::vector<int> labels{0, 1, 1, 1, 0, 0, 1, 0};
    auto g = interaction_means(x, labels, 0, 1, "a", "b");
    REQUIRE(g.bins_a.size() == 2);  // raw binning: values {0, 1}
    REQUIRE(g.bins_b.size() == 2);
    CHECK(*g.mean[0][0] == doctest::Approx(0.5));
    CHECK(*g.mean[0][1] == doctest::Approx(1.0));
    CHECK(*g.mean[1][0] == doctest::Approx(0.0));
    CHECK(*g.mean[1][1] == doctest::Approx(0.5));
    for (const auto& row : g.count)
        for (auto c : row) CHECK(c == 2);
}

TEST_CASE("all-zero labels give all-zero cell means") {
    auto [x, yunused] = oracles::two_gaussians(50, 2, 1.0, 3);
    std::vector<int> zeros(x.rows(), 0);
    auto g = interaction_means(x, zeros, 0, 1, "a", "b");
    for (const auto& row : g.mean)
        for (const auto& m : row)
            if (m) CHECK(*m == 0.0);
}

TEST_CASE("count-weighted mean of cells equals the global label mean exactly") {
    Rng rng(9);
    std::size_t n = 500;
    Matrix x(n, 2);
    std::vector<int> y(n);
    for (std::size_t r = 0; r < n; ++r) {
        x(r, 0) = rng.normal();
        x(r, 1) = rng.uniform_index(3);  // small-cardinality
        y[r] = rng.u01() < 0.3;
    }
    auto g = interaction_means(x, y, 0, 1, "a", "b");
    double weighted = 0.0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < g.bins_a.size(); ++i)
        for (std::size_t j = 0; j < g.bins_b.size(); ++j) {
            if (!g.count[i][j]) continue;
            weighted += *g.mean[i][j] * static_cast<double>(g.count[i][j]);
            total += g.count[i][j];
        }
    CHECK(total == n);
    double global = 0.0;
    for (int v : y) global += v;
    // integer label sums make both sides exact in doubles
    CHECK(weighted == global);
}

TEST_CASE("undersampling lifts sensitivity on a majority-biased baseline") {
    // Monte-Carlo over seeds: mean sensitivity with undersampling is at
    // least the unbalanced baseline's
    double sum_under = 0.0, sum_none = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(1000 + seed);
        std::size_t n = 400;
        Matrix x(n, 2);
        std::vector<int> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            y[r] = rng.u01() < 0.08 ? 1 : 0;
            x(r, 0) = rng.normal() + (y[r] ? 1.2 : 0.0);
            x(r, 1) = rng.normal();
        }
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < n; ++i) (i % 4 == 0 ? te : tr).push_back(i);
        Matrix xtr = x.select_rows(tr), xte = x.select_rows(te);
        auto ytr = select(std::span<const int>(y), tr);
        auto yte = select(std::span<const int>(y), te);
        bool both = false, pos = false, neg = false;
        for (int v : yte) (v ? pos : neg) = true;
        both = pos && neg;
        if (!both) continue;

        auto hp = Hyperparameters::defaults(ModelFamily::Glm);
        TrainedModel none = TrainedModel::train(xtr, ytr, hp, seed);
        auto m_none = metrics(confusion(classify(none.predict(xte)), yte));

        auto bal = balance(xtr, ytr, SamplingStrategy::Undersample, seed);
        TrainedModel under = TrainedModel::train(bal.x, bal.y, hp, seed);
        auto m_under = metrics(confusion(classify(under.predict(xte)), yte));

        sum_none += m_none.sensitivity.value_or(0.0);
        sum_under += m_under.sensitivity.value_or(0.0);
    }
    CHECK(sum_under >= sum_none);
}
