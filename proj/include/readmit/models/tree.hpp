#pragma once

// CART-style binary decision trees. Classification trees split on Gini
// impurity, regression trees on squared error. Growing is greedy: at every
// node the locally best split is taken with no lookahead, ties resolved by
// lowest column index then lowest threshold so results are reproducible.
// Overfitting is controlled afterwards by cost-complexity pruning, which
// selects the subtree minimizing R(T) + alpha * |T|.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "readmit/core.hpp"

namespace readmit {

enum class TreeTask { Classification, Regression };

struct TreeParams {
    TreeTask task = TreeTask::Classification;
    std::size_t min_node_size = 1;   // smallest admissible child
    std::size_t max_depth = 0;       // 0 = unlimited
    double complexity = 0.0;         // pruning weight applied after growing
    std::size_t features_per_split = 0;  // 0 = consider all features
    bool record_candidates = false;  // keep per-node candidate sets (tests)
};

struct TreeNode {
    int left = -1;   // -1 marks a leaf
    int right = -1;
    std::size_t split_col = 0;
    double threshold = 0.0;
    double value = 0.0;       // class-1 probability, or regression mean
    double leaf_error = 0.0;  // misclassified count (SSE in regression) as a leaf
    std::size_t n = 0;
    std::vector<std::size_t> candidates;

    bool is_leaf() const { return left < 0; }
};

class DecisionTree {
public:
    DecisionTree() = default;

    // y holds 0/1 labels for classification, arbitrary targets for regression.
    static DecisionTree train(const Matrix& x, std::span<const double> y,
                              const TreeParams& params, Rng* rng = nullptr) {
        if (x.rows() != y.size()) throw Error("tree training: row/label count mismatch");
        if (x.rows() == 0) throw Error("tree training: empty dataset");
        if (params.min_node_size < 1) throw Error("tree training: min node size must be >= 1");
        if (params.complexity < 0.0) throw Error("tree training: negative complexity");

        DecisionTree t;
        t.params_ = params;
        t.n_features_ = x.cols();
        t.root_n_ = x.rows();
        std::vector<std::size_t> rows(x.rows());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        t.grow(x, y, rows, 1, rng);
        if (params.complexity > 0.0) t = prune(t, params.complexity);
        return t;
    }

    double predict_row(std::span<const double> row) const {
        if (row.size() != n_features_) throw Error("tree predict: feature width mismatch");
        std::size_t i = 0;
        while (!nodes_[i].is_leaf()) {
            const TreeNode& nd = nodes_[i];
            i = row[nd.split_col] < nd.threshold ? static_cast<std::size_t>(nd.left)
                                                 : static_cast<std::size_t>(nd.right);
        }
        return nodes_[i].value;
    }

    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
        return out;
    }

    std::size_t leaf_count() const {
        std::size_t n = 0;
        for (const auto& nd : nodes_)
            if (nd.is_leaf()) ++n;
        return n;
    }

    // Total leaf error in raw units: misclassified-row count for
    // classification trees, summed squared error for regression trees.
    double training_error_sum() const {
        double s = 0.0;
        for (const auto& nd : nodes_)
            if (nd.is_leaf()) s += nd.leaf_error;
        return s;
    }

    // R(T): leaf error normalized by the training row count
    // (misclassification rate for classification, MSE for regression).
    double training_error() const {
        return training_error_sum() / static_cast<double>(root_n_);
    }

    // Cost-complexity pruning: returns the pruned subtree minimizing
    // R(T) + alpha * |T|, collapsing on ties so the smaller tree wins.
    // The minimization runs in raw error-count units (alpha scaled by the
    // training row count) so integer-valued errors keep cost comparisons
    // exact; dividing per-subtree errors by n first can miss exact ties by
    // one rounding.
    static DecisionTree prune(const DecisionTree& tree, double alpha) {
        if (alpha < 0.0) throw Error("prune: negative complexity weight");
        if (tree.nodes_.empty()) return tree;
        std::vector<bool> collapse(tree.nodes_.size(), false);
        tree.prune_cost(0, alpha * static_cast<double>(tree.root_n_), collapse);

        DecisionTree out;
        out.params_ = tree.params_;
        out.n_features_ = tree.n_features_;
        out.root_n_ = tree.root_n_;
        out.copy_pruned(tree, 0, collapse);
        return out;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::size_t feature_count() const { return n_features_; }
    std::size_t trained_rows() const { return root_n_; }
    const TreeParams& params() const { return params_; }

    // Serialization into a key-value container under the given prefix.
    void save(KvFile& kv, const std::string& prefix) const {
        kv.set_int(prefix + ".task", params_.task == TreeTask::Classification ? 0 : 1);
        kv.set_int(prefix + ".features", static_cast<long long>(n_features_));
        kv.set_int(prefix + ".rows", static_cast<long long>(root_n_));
        kv.set_int(prefix + ".nodes", static_cast<long long>(nodes_.size()));
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const TreeNode& nd = nodes_[i];
            std::string v = std::to_string(nd.left) + " " + std::to_string(nd.right) + " " +
                            std::to_string(nd.split_col) + " " + to_hexfloat(nd.threshold) +
                            " " + to_hexfloat(nd.value) + " " + to_hexfloat(nd.leaf_error) +
                            " " + std::to_string(nd.n);
            kv.set(prefix + ".node." + std::to_string(i), v);
        }
    }

    static DecisionTree load(const KvFile& kv, const std::string& prefix) {
        DecisionTree t;
        t.params_.task =
            kv.get_int(prefix + ".task") == 0 ? TreeTask::Classification : TreeTask::Regression;
        t.n_features_ = static_cast<std::size_t>(kv.get_int(prefix + ".features"));
        t.root_n_ = static_cast<std::size_t>(kv.get_int(prefix + ".rows"));
        std::size_t count = static_cast<std::size_t>(kv.get_int(prefix + ".nodes"));
        t.nodes_.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
            auto parts = split(kv.get(prefix + ".node." + std::to_string(i)), ' ');
            if (parts.size() != 7) throw ParseError("malformed tree node record");
            TreeNode& nd = t.nodes_[i];
            nd.left = static_cast<int>(parse_int(parts[0]));
            nd.right = static_cast<int>(parse_int(parts[1]));
            nd.split_col = static_cast<std::size_t>(parse_int(parts[2]));
            nd.threshold = parse_double(parts[3]);
            nd.value = parse_double(parts[4]);
            nd.leaf_error = parse_double(parts[5]);
            nd.n = static_cast<std::size_t>(parse_int(parts[6]));
        }
        return t;
    }

private:
    struct SplitChoice {
        bool found = false;
        std::size_t col = 0;
        double threshold = 0.0;
        double score = std::numeric_limits<double>::infinity();
    };

    std::size_t grow(const Matrix& x, std::span<const double> y,
                     std::vector<std::size_t>& rows, std::size_t depth, Rng* rng) {
        std::size_t self = nodes_.size();
        nodes_.emplace_back();
        fill_leaf_stats(nodes_[self], y, rows);

        bool pure = nodes_[self].leaf_error <= 0.0;
        bool depth_ok = params_.max_depth == 0 || depth < params_.max_depth + 1;
        bool size_ok = rows.size() >= 2 * params_.min_node_size;
        if (pure || !depth_ok || !size_ok) return self;

        std::vector<std::size_t> candidates = candidate_features(rng);
        SplitChoice best = find_best_split(x, y, rows, candidates);
        if (!best.found) return self;

        if (params_.record_candidates) nodes_[self].candidates = candidates;
        nodes_[self].split_col = best.col;
        nodes_[self].threshold = best.threshold;

        std::vector<std::size_t> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (std::size_t r : rows) {
            (x(r, best.col) < best.threshold ? left_rows : right_rows).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        std::size_t li = grow(x, y, left_rows, depth + 1, rng);
        std::size_t ri = grow(x, y, right_rows, depth + 1, rng);
        nodes_[self].left = static_cast<int>(li);
        nodes_[self].right = static_cast<int>(ri);
        return self;
    }

    void fill_leaf_stats(TreeNode& nd, std::span<const double> y,
                         std::span<const std::size_t> rows) const {
        nd.n = rows.size();
        double sum = 0.0;
        for (std::size_t r : rows) sum += y[r];
        nd.value = sum / static_cast<double>(rows.size());
        if (params_.task == TreeTask::Classification) {
            double pos = sum;
            double neg = static_cast<double>(rows.size()) - pos;
            nd.leaf_error = std::min(pos, neg);
        } else {
            double sse = 0.0;
            for (std::size_t r : rows) sse += (y[r] - nd.value) * (y[r] - nd.value);
            nd.leaf_error = sse;
        }
    }

    std::vector<std::size_t> candidate_features(Rng* rng) const {
        std::size_t m = params_.features_per_split;
        if (m == 0 || m >= n_features_ || rng == nullptr) {
            std::vector<std::size_t> all(n_features_);
            std::iota(all.begin(), all.end(), std::size_t{0});
            return all;
        }
        auto picked = rng->sample_without_replacement(n_features_, m);
        std::sort(picked.begin(), picked.end());  // scan order drives tie-breaking
        return picked;
    }

    SplitChoice find_best_split(const Matrix& x, std::span<const double> y,
                                std::span<const std::size_t> rows,
                                std::span<const std::size_t> candidates) const {
        SplitChoice best;
        const std::size_t n = rows.size();
        std::vector<std::pair<double, std::size_t>> order(n);

        for (std::size_t col : candidates) {
            for (std::size_t i = 0; i < n; ++i) order[i] = {x(rows[i], col), rows[i]};
            std::sort(order.begin(), order.end());

            if (params_.task == TreeTask::Classification) {
                double total_pos = 0.0;
                for (std::size_t i = 0; i < n; ++i) total_pos += y[order[i].second];
                double left_pos = 0.0;
                for (std::size_t i = 1; i < n; ++i) {
                    left_pos += y[order[i - 1].second];
                    if (order[i - 1].first == order[i].first) continue;
                    if (i < params_.min_node_size || n - i < params_.min_node_size) continue;
                    double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
                    double pl = left_pos / nl, pr = (total_pos - left_pos) / nr;
                    double score = nl * 2.0 * pl * (1.0 - pl) + nr * 2.0 * pr * (1.0 - pr);
                    if (score < best.score) {
                        best = {true, col, split_threshold(order[i - 1].first, order[i].first),
                                score};
                    }
                }
            } else {
                double total_sum = 0.0, total_sq = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double v = y[order[i].second];
                    total_sum += v;
                    total_sq += v * v;
                }
                double left_sum = 0.0, left_sq = 0.0;
                for (std::size_t i = 1; i < n; ++i) {
                    double v = y[order[i - 1].second];
                    left_sum += v;
                    left_sq += v * v;
                    if (order[i - 1].first == order[i].first) continue;
                    if (i < params_.min_node_size || n - i < params_.min_node_size) continue;
                    double nl = static_cast<double>(i), nr = static_cast<double>(n - i);
                    double right_sum = total_sum - left_sum, right_sq = total_sq - left_sq;
                    double sse_l = left_sq - left_sum * left_sum / nl;
                    double sse_r = right_sq - right_sum * right_sum / nr;
                    double score = sse_l + sse_r;
                    if (score < best.score) {
                        best = {true, col, split_threshold(order[i - 1].first, order[i].first),
                                score};
                    }
                }
            }
        }
        return best;
    }

    // Midpoint between adjacent distinct values, nudged so both sides stay
    // non-empty when the midpoint rounds onto the lower value.
    static double split_threshold(double lo, double hi) {
        double t = lo + (hi - lo) / 2.0;
        if (!(t > lo)) t = hi;
        return t;
    }

    // Bottom-up cost minimization in scaled units; returns (cost, leaves) of
    // the optimal pruned subtree rooted at i and marks collapsed nodes.
    std::pair<double, std::size_t> prune_cost(std::size_t i, double alpha_scaled,
                                              std::vector<bool>& collapse) const {
        const TreeNode& nd = nodes_[i];
        double leaf_cost = nd.leaf_error + alpha_scaled;
        if (nd.is_leaf()) return {leaf_cost, 1};
        auto [lc, ll] = prune_cost(static_cast<std::size_t>(nd.left), alpha_scaled, collapse);
        auto [rc, rl] = prune_cost(static_cast<std::size_t>(nd.right), alpha_scaled, collapse);
        double kept = lc + rc;
        if (leaf_cost <= kept) {
            collapse[i] = true;
            return {leaf_cost, 1};
        }
        return {kept, ll + rl};
    }

    std::size_t copy_pruned(const DecisionTree& src, std::size_t i,
                            const std::vector<bool>& collapse) {
        std::size_t self = nodes_.size();
        nodes_.push_back(src.nodes_[i]);
        nodes_[self].candidates.clear();
        if (src.nodes_[i].is_leaf() || collapse[i]) {
            nodes_[self].left = nodes_[self].right = -1;
            return self;
        }
        std::size_t li =
            copy_pruned(src, static_cast<std::size_t>(src.nodes_[i].left), collapse);
        std::size_t ri =
            copy_pruned(src, static_cast<std::size_t>(src.nodes_[i].right), collapse);
        nodes_[self].left = static_cast<int>(li);
        nodes_[self].right = static_cast<int>(ri);
        return self;
    }

    std::vector<TreeNode> nodes_;
    TreeParams params_;
    std::size_t n_features_ = 0;
    std::size_t root_n_ = 0;
};

// Convenience wrappers for 0/1 integer labels.
inline std::vector<double> to_double_labels(std::span<const int> y) {
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = static_cast<double>(y[i]);
    return out;
}

inline DecisionTree train_cart(const Matrix& x, std::span<const int> y,
                               const TreeParams& params, Rng* rng = nullptr) {
    auto yd = to_double_labels(y);
    return DecisionTree::train(x, yd, params, rng);
}

inline DecisionTree prune_cart(const DecisionTree& tree, double alpha) {
    return DecisionTree::prune(tree, alpha);
}

}  // namespace readmit
