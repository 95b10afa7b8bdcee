#pragma once

// Random forest built on the CART grower. Each tree sees a bootstrap sample
// of the rows and a fresh random subset of features at every split (the
// "feature bagging" step). Rows left out of a tree's bootstrap form its
// out-of-bag set, which drives permutation importance: a feature's score is
// the mean out-of-bag accuracy lost when its values are shuffled.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/models/tree.hpp"

namespace readmit {

struct ForestParams {
    std::size_t trees = 100;
    std::size_t features_per_split = 0;  // 0 = floor(sqrt(p)) / floor(p/3)
    std::size_t min_node_size = 5;
    std::size_t max_depth = 0;
    TreeTask task = TreeTask::Classification;
    bool record_candidates = false;
};

inline std::size_t default_features_per_split(std::size_t p, TreeTask task) {
    std::size_t m = task == TreeTask::Classification
                        ? static_cast<std::size_t>(std::sqrt(static_cast<double>(p)))
                        : p / 3;
    return std::max<std::size_t>(1, std::min(m, p));
}

class ForestModel {
public:
    struct Importance {
        std::vector<double> mean;  // accuracy-loss units
        std::vector<double> sd;    // over trees
        std::vector<double> z;     // mean / sd, NaN when sd == 0
    };

    static ForestModel train(const Matrix& x, std::span<const double> y,
                             ForestParams params, std::uint64_t seed) {
        if (params.trees < 1) throw Error("forest training: tree count must be >= 1");
        if (x.rows() == 0) throw Error("forest training: empty dataset");
        if (params.features_per_split == 0)
            params.features_per_split = default_features_per_split(x.cols(), params.task);
        if (params.features_per_split > x.cols())
            throw Error("forest training: features per split exceeds feature count");

        ForestModel f;
        f.params_ = params;
        f.seed_ = seed;
        f.n_features_ = x.cols();
        f.trees_.reserve(params.trees);
        f.oob_.assign(params.trees, {});

        Rng root(seed);
        const std::size_t n = x.rows();
        TreeParams tp;
        tp.task = params.task;
        tp.min_node_size = params.min_node_size;
        tp.max_depth = params.max_depth;
        tp.features_per_split = params.features_per_split;
        tp.record_candidates = params.record_candidates;

        std::vector<std::size_t> sample(n);
        std::vector<double> ys(n);
        for (std::size_t t = 0; t < params.trees; ++t) {
            Rng tree_rng = root.derive(t);
            std::vector<std::uint8_t> in_bag(n, 0);
            for (std::size_t i = 0; i < n; ++i) {
                std::size_t r = tree_rng.uniform_index(n);
                sample[i] = r;
                in_bag[r] = 1;
            }
            Matrix xs = x.select_rows(sample);
            for (std::size_t i = 0; i < n; ++i) ys[i] = y[sample[i]];
            f.trees_.push_back(DecisionTree::train(xs, ys, tp, &tree_rng));
            auto& oob = f.oob_[t];
            for (std::size_t i = 0; i < n; ++i)
                if (!in_bag[i]) oob.push_back(i);
        }
        return f;
    }

    static ForestModel train(const Matrix& x, std::span<const int> y, ForestParams params,
                             std::uint64_t seed) {
        auto yd = to_double_labels(y);
        return train(x, std::span<const double>(yd), params, seed);
    }

    // Mean of the member trees' outputs (class-1 probability for
    // classification forests).
    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows(), 0.0);
        for (const auto& t : trees_) {
            for (std::size_t r = 0; r < x.rows(); ++r) out[r] += t.predict_row(x.row(r));
        }
        for (double& v : out) v /= static_cast<double>(trees_.size());
        return out;
    }

    // Out-of-bag class-1 probability per training row; rows that were in
    // every bag come back as NaN.
    std::vector<double> oob_predictions(const Matrix& x) const {
        std::vector<double> sum(x.rows(), 0.0);
        std::vector<std::size_t> count(x.rows(), 0);
        for (std::size_t t = 0; t < trees_.size(); ++t) {
            for (std::size_t r : oob_[t]) {
                sum[r] += trees_[t].predict_row(x.row(r));
                ++count[r];
            }
        }
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r)
            out[r] = count[r] ? sum[r] / static_cast<double>(count[r])
                              : std::numeric_limits<double>::quiet_NaN();
        return out;
    }

    // Permutation importance over the training data the forest was fit on.
    // For each tree: baseline out-of-bag accuracy minus accuracy with the
    // feature's out-of-bag values shuffled, averaged across trees.
    Importance permutation_importance(const Matrix& x, std::span<const double> y,
                                      std::uint64_t seed) const {
        const std::size_t p = x.cols();
        std::vector<std::vector<double>> per_tree(p);
        Rng root(seed);

        for (std::size_t t = 0; t < trees_.size(); ++t) {
            const auto& oob = oob_[t];
            if (oob.empty()) continue;
            Matrix sub = x.select_rows(oob);
            std::vector<double> truth(oob.size());
            for (std::size_t i = 0; i < oob.size(); ++i) truth[i] = y[oob[i]];
            double base = accuracy_on(trees_[t], sub, truth);

            Rng tree_rng = root.derive(t);
            std::vector<double> saved(oob.size());
            std::vector<std::size_t> perm(oob.size());
            for (std::size_t j = 0; j < p; ++j) {
                for (std::size_t i = 0; i < oob.size(); ++i) {
                    saved[i] = sub(i, j);
                    perm[i] = i;
                }
                tree_rng.shuffle(perm);
                for (std::size_t i = 0; i < oob.size(); ++i) sub(i, j) = saved[perm[i]];
                per_tree[j].push_back(base - accuracy_on(trees_[t], sub, truth));
                for (std::size_t i = 0; i < oob.size(); ++i) sub(i, j) = saved[i];
            }
        }

        Importance imp;
        imp.mean.resize(p);
        imp.sd.resize(p);
        imp.z.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            if (per_tree[j].empty()) {
                imp.mean[j] = 0.0;
                imp.sd[j] = 0.0;
                imp.z[j] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            imp.mean[j] = stats::mean(per_tree[j]);
            imp.sd[j] = stats::sample_sd(per_tree[j]);
            imp.z[j] = imp.sd[j] > 0.0 ? imp.mean[j] / imp.sd[j]
                                       : std::numeric_limits<double>::quiet_NaN();
        }
        return imp;
    }

    const std::vector<DecisionTree>& trees() const { return trees_; }
    const std::vector<std::vector<std::size_t>>& oob_rows() const { return oob_; }
    const ForestParams& params() const { return params_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t feature_count() const { return n_features_; }

    void save(KvFile& kv, const std::string& prefix) const {
        kv.set_int(prefix + ".trees", static_cast<long long>(trees_.size()));
        kv.set_int(prefix + ".features", static_cast<long long>(n_features_));
        kv.set_int(prefix + ".features_per_split",
                   static_cast<long long>(params_.features_per_split));
        kv.set_int(prefix + ".min_node_size", static_cast<long long>(params_.min_node_size));
        kv.set(prefix + ".seed", std::to_string(seed_));
        for (std::size_t t = 0; t < trees_.size(); ++t)
            trees_[t].save(kv, prefix + ".tree." + std::to_string(t));
    }

    static ForestModel load(const KvFile& kv, const std::string& prefix) {
        ForestModel f;
        std::size_t count = static_cast<std::size_t>(kv.get_int(prefix + ".trees"));
        f.n_features_ = static_cast<std::size_t>(kv.get_int(prefix + ".features"));
        f.params_.trees = count;
        f.params_.features_per_split =
            static_cast<std::size_t>(kv.get_int(prefix + ".features_per_split"));
        f.params_.min_node_size =
            static_cast<std::size_t>(kv.get_int(prefix + ".min_node_size"));
        f.seed_ = static_cast<std::uint64_t>(parse_int(kv.get(prefix + ".seed")));
        f.trees_.reserve(count);
        for (std::size_t t = 0; t < count; ++t)
            f.trees_.push_back(DecisionTree::load(kv, prefix + ".tree." + std::to_string(t)));
        f.oob_.assign(count, {});  // bags are not persisted
        return f;
    }

private:
    static double accuracy_on(const DecisionTree& t, const Matrix& x,
                              std::span<const double> y) {
        std::size_t hit = 0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            int pred = t.predict_row(x.row(r)) >= 0.5 ? 1 : 0;
            if (pred == static_cast<int>(y[r])) ++hit;
        }
        return static_cast<double>(hit) / static_cast<double>(x.rows());
    }

    std::vector<DecisionTree> trees_;
    std::vector<std::vector<std::size_t>> oob_;
    ForestParams params_;
    std::uint64_t seed_ = 0;
    std::size_t n_features_ = 0;
};

}  // namespace readmit
