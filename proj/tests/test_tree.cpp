#include <doctest.h>

#include "oracles.hpp"
#include "readmit/models/tree.hpp"

using namespace readmit;

namespace {

Matrix xor_features() { return Matrix::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}}); }
const std::vector<int> xor_labels{0, 1, 1, 0};

}  // namespace

TEST_CASE("xor grows to a depth-2 tree with perfect training accuracy") {
    TreeParams tp;
    tp.min_node_size = 1;
    DecisionTree t = train_cart(xor_features(), xor_labels, tp);
    CHECK(oracles::tree_depth(t) == 2);
    auto pred = t.predict(xor_features());
    for (std::size_t i = 0; i < 4; ++i)
        CHECK((pred[i] >= 0.5 ? 1 : 0) == xor_labels[i]);
    CHECK(t.training_error() == 0.0);
}

TEST_CASE("pure single-class data yields a single leaf") {
    Matrix x = Matrix::from_rows({{1, 0}, {2, 1}, {3, 0}});
    std::vector<int> y{1, 1, 1};
    DecisionTree t = train_cart(x, y, {});
    CHECK(t.leaf_count() == 1);
    CHECK(t.predict_row(x.row(0)) == 1.0);
}

TEST_CASE("identical rows with mixed labels become a leaf, not an error") {
    Matrix x = Matrix::from_rows({{1, 1}, {1, 1}, {1, 1}, {1, 1}});
    std::vector<int> y{0, 1, 0, 1};
    DecisionTree t = train_cart(x, y, {});
    CHECK(t.leaf_count() == 1);
    CHECK(t.predict_row(x.row(0)) == 0.5);
}

TEST_CASE("huge complexity weight prunes to the root") {
    auto [x, y] = oracles::two_gaussians(80, 3, 2.0, 17);
    TreeParams tp;
    tp.min_node_size = 1;
    DecisionTree full = train_cart(x, y, tp);
    CHECK(full.leaf_count() > 1);
    DecisionTree pruned = prune_cart(full, 1e9);
    CHECK(pruned.leaf_count() == 1);
}

TEST_CASE("alpha zero leaves the tree unchanged") {
    auto [x, y] = oracles::two_gaussians(60, 3, 1.0, 3);
    TreeParams tp;
    tp.min_node_size = 1;
    DecisionTree full = train_cart(x, y, tp);
    DecisionTree pruned = prune_cart(full, 0.0);
    CHECK(pruned.leaf_count() == full.leaf_count());
    CHECK(pruned.training_error() == full.training_error());
}

TEST_CASE("pruning a single leaf is a no-op for any alpha") {
    Matrix x = Matrix::from_rows({{1}, {2}, {3}});
    std::vector<int> y{1, 1, 1};
    DecisionTree t = train_cart(x, y, {});
    for (double a : {0.0, 0.5, 100.0}) {
        DecisionTree p = prune_cart(t, a);
        CHECK(p.leaf_count() == 1);
    }
}

TEST_CASE("negative alpha is rejected") {
    Matrix x = Matrix::from_rows({{1}, {2}});
    std::vector<int> y{0, 1};
    DecisionTree t = train_cart(x, y, {});
    CHECK_THROWS_AS(prune_cart(t, -0.1), Error);
}

TEST_CASE("weakest-link pruning matches exhaustive enumeration on random trees") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        Rng rng(900 + seed);
        std::size_t n = 40;
        Matrix x(n, 3);
        std::vector<int> y(n);
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < 3; ++c) x(r, c) = rng.u01();
            y[r] = rng.u01() < 0.5 ? 0 : 1;
        }
        TreeParams tp;
        tp.min_node_size = 2;
        tp.max_depth = 3;
        DecisionTree t = train_cart(x, y, tp);
        // dyadic alphas keep the scaled-cost arithmetic exact on both sides
        for (int k : {0, 1, 2, 4, 8, 16, 32}) {
            double alpha = static_cast<double>(k) / 64.0;
            DecisionTree pruned = prune_cart(t, alpha);
            auto best = oracles::best_pruning(t, alpha);
            double cost = pruned.training_error_sum() +
                          alpha * static_cast<double>(t.trained_rows()) *
                              static_cast<double>(pruned.leaf_count());
            CHECK(cost == best.cost);
            CHECK(pruned.leaf_count() == best.leaves);
        }
    }
}

TEST_CASE("pruned size is monotone non-increasing in alpha") {
    auto [x, y] = oracles::two_gaussians(120, 4, 1.0, 5);
    TreeParams tp;
    tp.min_node_size = 2;
    tp.max_depth = 4;
    DecisionTree t = train_cart(x, y, tp);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double alpha : {0.0, 0.001, 0.004, 0.01, 0.03, 0.1, 0.5}) {
        std::size_t leaves = prune_cart(t, alpha).leaf_count();
        CHECK(leaves <= prev);
        prev = leaves;
    }
}

TEST_CASE("regression tree fits leaf means") {
    Matrix x = Matrix::from_rows({{0}, {0}, {1}, {1}});
    std::vector<double> y{1.0, 3.0, 10.0, 14.0};
    TreeParams tp;
    tp.task = TreeTask::Regression;
    tp.min_node_size = 2;
    DecisionTree t = DecisionTree::train(x, y, tp);
    CHECK(t.predict_row(x.row(0)) == doctest::Approx(2.0));
    CHECK(t.predict_row(x.row(2)) == doctest::Approx(12.0));
}

TEST_CASE("training is deterministic") {
    auto [x, y] = oracles::two_gaussians(100, 4, 1.5, 77);
    TreeParams tp;
    tp.min_node_size = 3;
    DecisionTree a = train_cart(x, y, tp);
    DecisionTree b = train_cart(x, y, tp);
    auto pa = a.predict(x), pb = b.predict(x);
    CHECK(pa == pb);
    CHECK(a.leaf_count() == b.leaf_count());
}

TEST_CASE("tree serialization round-trips predictions bit for bit") {
    auto [x, y] = oracles::two_gaussians(70, 3, 1.0, 9);
    TreeParams tp;
    tp.min_node_size = 2;
    DecisionTree t = train_cart(x, y, tp);
    KvFile kv;
    t.save(kv, "m");
    DecisionTree back = DecisionTree::load(KvFile::parse(kv.to_string()), "m");
    CHECK(back.predict(x) == t.predict(x));
}
