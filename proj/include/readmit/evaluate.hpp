#pragma once

// Confusion-matrix metrics, the sampling-strategy comparison grid, and
// two-feature interaction means. The positive class is "readmitted"
// throughout. Metrics with a zero denominator are flagged undefined rather
// than propagated as NaN.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/models/model.hpp"
#include "readmit/preprocess.hpp"

namespace readmit {

struct ConfusionMatrix {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size())
        throw Error("confusion: prediction/truth length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i]) {
            predicted[i] ? ++cm.tp : ++cm.fn;
        } else {
            predicted[i] ? ++cm.fp : ++cm.tn;
        }
    }
    return cm;
}

struct MetricsReport {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;  // recall is the same number
    std::optional<double> specificity;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error("metrics: empty confusion matrix");
    auto ratio = [](std::size_t num, std::size_t den) -> std::optional<double> {
        if (den == 0) return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    MetricsReport r;
    r.accuracy = ratio(cm.tp + cm.tn, cm.total());
    r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
    r.specificity = ratio(cm.tn, cm.tn + cm.fp);
    r.precision = ratio(cm.tp, cm.tp + cm.fp);
    r.recall = r.sensitivity;
    if (r.precision && r.recall && (*r.precision + *r.recall) > 0.0)
        r.f1 = 2.0 * *r.precision * *r.recall / (*r.precision + *r.recall);
    else if (r.precision && r.recall)
        r.f1 = 0.0;
    return r;
}

inline std::string metric_to_string(const std::optional<double>& v) {
    return v ? format_double(*v, 6) : "NA";
}

// ---------------------------------------------------------------------------
// sampling-strategy comparison

struct SamplingComparisonRow {
    std::string strategy;
    std::string metric;
    std::optional<double> value;
    std::string error;  // non-empty when this strategy failed
};

// For each strategy: rebalance the training rows, fit the given model family
// and evaluate on the untouched test rows. A strategy that fails to train is
// reported in place without aborting the others.
inline std::vector<SamplingComparisonRow> compare_sampling(
    std::span<const SamplingStrategy> strategies, const Hyperparameters& hp, const Matrix& x_train,
    std::span<const int> y_train, const Matrix& x_test, std::span<const int> y_test,
    std::uint64_t seed, double rose_shrink = 1.0) {
    std::vector<SamplingComparisonRow> rows;
    const char* names[] = {"f1", "precision", "recall", "sensitivity", "specificity"};
    for (SamplingStrategy s : strategies) {
        std::string label = strategy_name(s);
        try {
            BalanceResult b = balance(x_train, y_train, s, seed, rose_shrink);
            TrainedModel m = TrainedModel::train(b.x, b.y, hp, seed);
            auto pred = classify(m.predict(x_test), m.threshold());
            MetricsReport r = metrics(confusion(pred, y_test));
            const std::optional<double> vals[] = {r.f1, r.precision, r.recall, r.sensitivity,
                                                  r.specificity};
            for (std::size_t i = 0; i < 5; ++i) rows.push_back({label, names[i], vals[i], ""});
        } catch (const std::exception& e) {
            for (std::size_t i = 0; i < 5; ++i)
                rows.push_back({label, names[i], std::nullopt, e.what()});
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// interaction-effect grid

struct InteractionGrid {
    std::string feature_a, feature_b;
    std::vector<std::string> bins_a, bins_b;      // bin labels
    std::vector<std::vector<std::size_t>> count;  // [a][b]
    std::vector<std::vector<std::optional<double>>> mean;  // mean label, empty cell = nullopt
};

struct InteractionBinning {
    double quantile = 0.5;          // low/high split point for numerics
    std::size_t max_levels = 8;     // distinct values at or under this use raw bins
};

namespace detail {

struct BinSpec {
    std::vector<std::string> labels;
    std::vector<double> raw_values;  // used when raw binning applies
    double cut = 0.0;
    bool raw = false;

    std::size_t bin_of(double v) const {
        if (raw) {
            for (std::size_t i = 0; i < raw_values.size(); ++i)
                if (v == raw_values[i]) return i;
            return raw_values.size() - 1;  // unseen value: last bin
        }
        return v <= cut ? 0 : 1;
    }
};

inline BinSpec make_bins(std::span<const double> col, const InteractionBinning& binning) {
    std::vector<double> uniq(col.begin(), col.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    BinSpec spec;
    if (uniq.size() <= binning.max_levels) {
        spec.raw = true;
        spec.raw_values = uniq;
        for (double v : uniq) spec.labels.push_back(format_double(v, 10));
    } else {
        spec.cut = stats::quantile({col.begin(), col.end()}, binning.quantile);
        spec.labels = {"low", "high"};
    }
    return spec;
}

}  // namespace detail

// Mean label per (bin_a, bin_b) cell: the data behind interaction plots.
// Numeric features default to a low/high split at the median; features with
// few distinct values are binned by their raw values.
inline InteractionGrid interaction_means(const Matrix& x, std::span<const int> labels,
                                         std::size_t col_a, std::size_t col_b,
                                         std::string name_a, std::string name_b,
                                         const InteractionBinning& binning = {}) {
    if (col_a >= x.cols() || col_b >= x.cols())
        throw Error("interaction_means: feature column out of range");
    auto a = x.column(col_a);
    auto b = x.column(col_b);
    auto spec_a = detail::make_bins(a, binning);
    auto spec_b = detail::make_bins(b, binning);

    InteractionGrid g;
    g.feature_a = std::move(name_a);
    g.feature_b = std::move(name_b);
    g.bins_a = spec_a.labels;
    g.bins_b = spec_b.labels;
    std::vector<std::vector<double>> sums(g.bins_a.size(),
                                          std::vector<double>(g.bins_b.size(), 0.0));
    g.count.assign(g.bins_a.size(), std::vector<std::size_t>(g.bins_b.size(), 0));
    for (std::size_t r = 0; r < x.rows(); ++r) {
        std::size_t i = spec_a.bin_of(a[r]);
        std::size_t j = spec_b.bin_of(b[r]);
        sums[i][j] += static_cast<double>(labels[r]);
        ++g.count[i][j];
    }
    g.mean.assign(g.bins_a.size(), std::vector<std::optional<double>>(g.bins_b.size()));
    for (std::size_t i = 0; i < g.bins_a.size(); ++i)
        for (std::size_t j = 0; j < g.bins_b.size(); ++j)
            if (g.count[i][j] > 0)
                g.mean[i][j] = sums[i][j] / static_cast<double>(g.count[i][j]);
    return g;
}

}  // namespace readmit
