#pragma once

// Gradient boosting. The default squared-error mode starts from the label
// mean and at every stage fits a shallow regression tree to the current
// residuals, then moves the prediction by a learning-rate-scaled step of the
// tree's output; training MSE is recorded after every stage. The optional
// logistic mode boosts the log-odds against pseudo-residuals y - sigma(F)
// and records mean log-loss per stage instead.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/models/tree.hpp"

namespace readmit {

enum class GbmLoss { SquaredError, Logistic };

inline std::string gbm_loss_name(GbmLoss l) {
    return l == GbmLoss::SquaredError ? "squared" : "logistic";
}

inline GbmLoss gbm_loss_from_name(std::string_view s) {
    std::string n = to_lower(trim(s));
    if (n == "squared" || n == "mse") return GbmLoss::SquaredError;
    if (n == "logistic" || n == "logloss") return GbmLoss::Logistic;
    throw ConfigError("unknown gbm loss: " + std::string(s));
}

struct GbmParams {
    std::size_t stages = 100;
    double learning_rate = 0.1;
    std::size_t max_depth = 3;
    std::size_t min_node_size = 5;
    GbmLoss loss = GbmLoss::SquaredError;
};

class GbmModel {
public:
    static GbmModel train(const Matrix& x, std::span<const double> y, const GbmParams& params) {
        if (params.stages < 1) throw Error("gbm training: stage count must be >= 1");
        if (!(params.learning_rate > 0.0) || params.learning_rate > 1.0)
            throw Error("gbm training: learning rate must be in (0, 1]");
        if (x.rows() != y.size()) throw Error("gbm training: row/label count mismatch");
        if (x.rows() == 0) throw Error("gbm training: empty dataset");

        GbmModel m;
        m.params_ = params;
        m.n_features_ = x.cols();

        const std::size_t n = x.rows();
        const bool logistic = params.loss == GbmLoss::Logistic;
        if (logistic) {
            double p = std::clamp(stats::mean(y), 1e-6, 1.0 - 1e-6);
            m.base_ = std::log(p / (1.0 - p));  // log-odds
        } else {
            m.base_ = stats::mean(y);
        }

        std::vector<double> current(n, m.base_);
        std::vector<double> residual(n);

        TreeParams tp;
        tp.task = TreeTask::Regression;
        tp.max_depth = params.max_depth;
        tp.min_node_size = params.min_node_size;

        m.stages_.reserve(params.stages);
        m.stage_loss_.reserve(params.stages);
        for (std::size_t s = 0; s < params.stages; ++s) {
            for (std::size_t i = 0; i < n; ++i)
                residual[i] = y[i] - (logistic ? sigmoid(current[i]) : current[i]);
            DecisionTree tree = DecisionTree::train(x, residual, tp);
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                current[i] += params.learning_rate * tree.predict_row(x.row(i));
                if (logistic) {
                    double f = current[i];
                    loss += f >= 0 ? (1.0 - y[i]) * f + std::log1p(std::exp(-f))
                                   : -y[i] * f + std::log1p(std::exp(f));
                } else {
                    double e = y[i] - current[i];
                    loss += e * e;
                }
            }
            m.stages_.push_back(std::move(tree));
            m.stage_loss_.push_back(loss / static_cast<double>(n));
        }
        return m;
    }

    static GbmModel train(const Matrix& x, std::span<const int> y, const GbmParams& params) {
        auto yd = to_double_labels(y);
        return train(x, std::span<const double>(yd), params);
    }

    // Raw additive prediction: base + lr * sum of stage outputs.
    double predict_raw(std::span<const double> row) const {
        double v = base_;
        for (const auto& t : stages_) v += params_.learning_rate * t.predict_row(row);
        return v;
    }

    // Class-1 probability: the clipped squared-error fit, or the logistic
    // link of the boosted log-odds.
    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows());
        const bool logistic = params_.loss == GbmLoss::Logistic;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double f = predict_raw(x.row(r));
            out[r] = logistic ? sigmoid(f) : std::clamp(f, 0.0, 1.0);
        }
        return out;
    }

    double base_score() const { return base_; }
    const std::vector<DecisionTree>& stage_trees() const { return stages_; }
    // per-stage training loss: MSE for squared error, mean log-loss otherwise
    const std::vector<double>& stage_mse() const { return stage_loss_; }
    double learning_rate() const { return params_.learning_rate; }
    GbmLoss loss() const { return params_.loss; }
    std::size_t feature_count() const { return n_features_; }

    void save(KvFile& kv, const std::string& prefix) const {
        kv.set_int(prefix + ".stages", static_cast<long long>(stages_.size()));
        kv.set_int(prefix + ".features", static_cast<long long>(n_features_));
        kv.set(prefix + ".base", to_hexfloat(base_));
        kv.set(prefix + ".learning_rate", to_hexfloat(params_.learning_rate));
        kv.set(prefix + ".loss", gbm_loss_name(params_.loss));
        for (std::size_t s = 0; s < stages_.size(); ++s)
            stages_[s].save(kv, prefix + ".stage." + std::to_string(s));
    }

    static GbmModel load(const KvFile& kv, const std::string& prefix) {
        GbmModel m;
        std::size_t count = static_cast<std::size_t>(kv.get_int(prefix + ".stages"));
        m.n_features_ = static_cast<std::size_t>(kv.get_int(prefix + ".features"));
        m.base_ = parse_double(kv.get(prefix + ".base"));
        m.params_.learning_rate = parse_double(kv.get(prefix + ".learning_rate"));
        m.params_.loss = gbm_loss_from_name(kv.get_or(prefix + ".loss", "squared"));
        m.params_.stages = count;
        m.stages_.reserve(count);
        for (std::size_t s = 0; s < count; ++s)
            m.stages_.push_back(DecisionTree::load(kv, prefix + ".stage." + std::to_string(s)));
        return m;
    }

private:
    GbmParams params_;
    double base_ = 0.0;
    std::vector<DecisionTree> stages_;
    std::vector<double> stage_loss_;
    std::size_t n_features_ = 0;
};

}  // namespace readmit
