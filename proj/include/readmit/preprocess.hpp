#pragma once

// Preprocessing: robust outlier flagging via the median absolute deviation,
// training-mean imputation, min-max normalization, seeded 70/30 partitioning
// and the three class rebalancing strategies (oversample, undersample,
// ROSE-style smoothed resampling). All parameters are fit on training rows
// only and reapplied verbatim to test rows.

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "readmit/core.hpp"

namespace readmit {

// MAD consistency constant for a normal distribution.
inline constexpr double kMadScale = 1.4826;

struct OutlierStats {
    double median = 0.0;
    double mad = 0.0;  // unscaled median absolute deviation
    bool degenerate = false;  // mad == 0: scale carries no information
};

inline OutlierStats fit_outlier_stats(std::span<const double> column) {
    std::vector<double> finite;
    finite.reserve(column.size());
    for (double v : column)
        if (std::isfinite(v)) finite.push_back(v);
    if (finite.empty()) throw Error("outlier fit: column is entirely missing");
    if (finite.size() < 2) throw Error("outlier fit: need at least 2 finite values");
    OutlierStats s;
    s.median = stats::median_inplace(finite);
    s.mad = stats::mad(finite, s.median);
    s.degenerate = s.mad == 0.0;
    return s;
}

// Flags x where |x - median| / (1.4826 * MAD) > cutoff. A degenerate scale
// (MAD == 0) flags nothing; missing cells are never flagged.
inline std::vector<bool> detect_outliers_mad(std::span<const double> column, double cutoff,
                                             bool* degenerate = nullptr) {
    OutlierStats s = fit_outlier_stats(column);
    if (degenerate) *degenerate = s.degenerate;
    std::vector<bool> mask(column.size(), false);
    if (s.degenerate) return mask;
    const double scale = kMadScale * s.mad;
    for (std::size_t i = 0; i < column.size(); ++i) {
        if (!std::isfinite(column[i])) continue;
        mask[i] = std::fabs(column[i] - s.median) / scale > cutoff;
    }
    return mask;
}

struct ImputationParams {
    std::vector<double> means;  // one per column
};

// Column means over finite cells of the given rows (all rows when empty).
inline ImputationParams fit_impute(const Matrix& x) {
    ImputationParams p;
    p.means.resize(x.cols());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double v = x(r, c);
            if (std::isfinite(v)) {
                sum += v;
                ++count;
            }
        }
        if (count == 0)
            throw Error("impute fit: column " + std::to_string(c) + " is entirely missing");
        p.means[c] = sum / static_cast<double>(count);
    }
    return p;
}

inline Matrix impute_missing(Matrix x, const ImputationParams& p) {
    if (p.means.size() != x.cols()) throw Error("impute: column count mismatch");
    for (std::size_t c = 0; c < x.cols(); ++c)
        for (std::size_t r = 0; r < x.rows(); ++r)
            if (!std::isfinite(x(r, c))) x(r, c) = p.means[c];
    return x;
}

struct NormalizationParams {
    std::vector<double> min;  // E_min per column
    std::vector<double> max;  // E_max per column
};

inline NormalizationParams fit_normalize(const Matrix& x) {
    NormalizationParams p;
    p.min.assign(x.cols(), std::numeric_limits<double>::infinity());
    p.max.assign(x.cols(), -std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < x.cols(); ++c) {
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double v = x(r, c);
            if (!std::isfinite(v)) throw Error("normalize fit: non-finite cell");
            p.min[c] = std::min(p.min[c], v);
            p.max[c] = std::max(p.max[c], v);
        }
    }
    return p;
}

// (v - E_min) / (E_max - E_min); a constant column maps to 0.5 exactly.
// Values outside the training range land outside [0, 1]; callers may count
// them via out_of_range.
inline Matrix normalize(Matrix x, const NormalizationParams& p,
                        std::size_t* out_of_range = nullptr) {
    if (p.min.size() != x.cols()) throw Error("normalize: column count mismatch");
    std::size_t outside = 0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
        const double lo = p.min[c], span = p.max[c] - p.min[c];
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double v = x(r, c);
            if (!std::isfinite(v)) throw Error("normalize: non-finite cell");
            double n = span == 0.0 ? 0.5 : (v - lo) / span;
            if (n < 0.0 || n > 1.0) ++outside;
            x(r, c) = n;
        }
    }
    if (out_of_range) *out_of_range = outside;
    return x;
}

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
    double ratio = 0.7;
};

inline SplitIndices partition(std::size_t n_rows, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("partition: ratio must be in (0, 1)");
    if (n_rows < 10) throw Error("partition: need at least 10 rows");
    std::vector<std::size_t> idx(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) idx[i] = i;
    Rng rng(seed);
    rng.shuffle(idx);
    std::size_t k = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(n_rows)));
    k = std::min(std::max<std::size_t>(k, 1), n_rows - 1);
    SplitIndices s;
    s.seed = seed;
    s.ratio = ratio;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

enum class SamplingStrategy { Oversample, Undersample, Rose };

inline std::string strategy_name(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::Oversample: return "oversample";
        case SamplingStrategy::Undersample: return "undersample";
        case SamplingStrategy::Rose: return "rose";
    }
    return "?";
}

inline SamplingStrategy strategy_from_name(std::string_view s) {
    std::string n = to_lower(trim(s));
    if (n == "oversample" || n == "over") return SamplingStrategy::Oversample;
    if (n == "undersample" || n == "under") return SamplingStrategy::Undersample;
    if (n == "rose") return SamplingStrategy::Rose;
    throw ConfigError("unknown sampling strategy: " + std::string(s));
}

struct BalanceResult {
    Matrix x;
    std::vector<int> y;
};

namespace detail {

inline BalanceResult rose_sample(const Matrix& x, std::span<const int> y, double shrink,
                                 Rng& rng) {
    const std::size_t n = x.rows(), p = x.cols();
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < n; ++i) (y[i] ? pos : neg).push_back(i);

    // Per-class diagonal bandwidths: Silverman's multivariate rule times the
    // shrink factor, h_j = shrink * (4 / ((p + 2) n_c))^(1 / (p + 4)) * sd_j.
    auto bandwidths = [&](const std::vector<std::size_t>& rows) {
        std::vector<double> h(p, 0.0);
        if (rows.size() < 2) return h;
        double factor = std::pow(4.0 / ((static_cast<double>(p) + 2.0) *
                                        static_cast<double>(rows.size())),
                                 1.0 / (static_cast<double>(p) + 4.0));
        for (std::size_t c = 0; c < p; ++c) {
            std::vector<double> col(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) col[i] = x(rows[i], c);
            h[c] = shrink * factor * stats::sample_sd(col);
        }
        return h;
    };
    std::vector<double> h_pos = bandwidths(pos), h_neg = bandwidths(neg);

    std::size_t n_pos = n / 2;
    std::size_t n_neg = n - n_pos;
    BalanceResult out;
    out.x = Matrix(n, p);
    out.y.resize(n);
    std::vector<double> row(p);
    std::size_t w = 0;
    auto emit = [&](const std::vector<std::size_t>& rows, const std::vector<double>& h,
                    int label, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) {
            std::size_t src = rows[rng.uniform_index(rows.size())];
            for (std::size_t c = 0; c < p; ++c)
                row[c] = x(src, c) + (h[c] > 0.0 ? h[c] * rng.normal() : 0.0);
            std::copy(row.begin(), row.end(), out.x.row(w).begin());
            out.y[w] = label;
            ++w;
        }
    };
    emit(pos, h_pos, 1, n_pos);
    emit(neg, h_neg, 0, n_neg);
    return out;
}

}  // namespace detail

// Rebalances training rows so both classes are equally represented.
// Oversample keeps every row and duplicates minority rows with replacement;
// undersample keeps the minority and subsamples the majority without
// replacement; rose draws an entirely synthetic sample from per-class
// smoothed kernels centered on existing rows.
inline BalanceResult balance(const Matrix& x, std::span<const int> y, SamplingStrategy strategy,
                             std::uint64_t seed, double rose_shrink = 1.0) {
    if (x.rows() != y.size()) throw Error("balance: row/label count mismatch");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) throw Error("balance: both classes must be present");

    Rng rng(seed);
    BalanceResult out;
    switch (strategy) {
        case SamplingStrategy::Oversample: {
            const auto& minority = pos.size() <= neg.size() ? pos : neg;
            std::size_t deficit =
                (pos.size() <= neg.size() ? neg.size() : pos.size()) - minority.size();
            std::vector<std::size_t> keep(x.rows());
            for (std::size_t i = 0; i < x.rows(); ++i) keep[i] = i;
            for (std::size_t i = 0; i < deficit; ++i)
                keep.push_back(minority[rng.uniform_index(minority.size())]);
            out.x = x.select_rows(keep);
            out.y = select(y, keep);
            break;
        }
        case SamplingStrategy::Undersample: {
            const auto& minority = pos.size() <= neg.size() ? pos : neg;
            const auto& majority = pos.size() <= neg.size() ? neg : pos;
            auto picks = rng.sample_without_replacement(majority.size(), minority.size());
            std::vector<std::size_t> keep;
            keep.reserve(2 * minority.size());
            for (std::size_t i : picks) keep.push_back(majority[i]);
            keep.insert(keep.end(), minority.begin(), minority.end());
            std::sort(keep.begin(), keep.end());  // stable original order
            out.x = x.select_rows(keep);
            out.y = select(y, keep);
            break;
        }
        case SamplingStrategy::Rose:
            out = detail::rose_sample(x, y, rose_shrink, rng);
            break;
    }
    return out;
}

// ---------------------------------------------------------------------------
// sidecar persistence for fitted preprocessing parameters

struct PreprocessParams {
    double outlier_cutoff = 3.0;
    bool outliers_enabled = true;
    std::vector<std::uint8_t> is_numeric;  // per column: MAD applies
    std::vector<OutlierStats> outliers;    // per column (unused when not numeric)
    ImputationParams impute;
    NormalizationParams normalize;

    void save(const std::string& path) const {
        KvFile kv;
        kv.set("format", "readmit-params/1");
        kv.set("outlier.cutoff", to_hexfloat(outlier_cutoff));
        kv.set("outlier.enabled", outliers_enabled ? "true" : "false");
        kv.set_int("columns", static_cast<long long>(impute.means.size()));
        for (std::size_t c = 0; c < impute.means.size(); ++c) {
            std::string k = "column." + std::to_string(c);
            kv.set(k + ".numeric", is_numeric[c] ? "true" : "false");
            if (is_numeric[c]) {
                kv.set(k + ".outlier_median", to_hexfloat(outliers[c].median));
                kv.set(k + ".outlier_mad", to_hexfloat(outliers[c].mad));
            }
            kv.set(k + ".mean", to_hexfloat(impute.means[c]));
            kv.set(k + ".min", to_hexfloat(normalize.min[c]));
            kv.set(k + ".max", to_hexfloat(normalize.max[c]));
        }
        kv.save(path);
    }

    static PreprocessParams load(const std::string& path) {
        KvFile kv = KvFile::load(path);
        if (kv.get("format") != "readmit-params/1")
            throw ParseError(path + ": unsupported params format");
        PreprocessParams p;
        p.outlier_cutoff = parse_double(kv.get("outlier.cutoff"));
        p.outliers_enabled = kv.get_bool_or("outlier.enabled", true);
        std::size_t n = static_cast<std::size_t>(kv.get_int("columns"));
        p.is_numeric.resize(n);
        p.outliers.resize(n);
        p.impute.means.resize(n);
        p.normalize.min.resize(n);
        p.normalize.max.resize(n);
        for (std::size_t c = 0; c < n; ++c) {
            std::string k = "column." + std::to_string(c);
            p.is_numeric[c] = kv.get_bool_or(k + ".numeric", false);
            if (p.is_numeric[c]) {
                p.outliers[c].median = parse_double(kv.get(k + ".outlier_median"));
                p.outliers[c].mad = parse_double(kv.get(k + ".outlier_mad"));
                p.outliers[c].degenerate = p.outliers[c].mad == 0.0;
            }
            p.impute.means[c] = parse_double(kv.get(k + ".mean"));
            p.normalize.min[c] = parse_double(kv.get(k + ".min"));
            p.normalize.max[c] = parse_double(kv.get(k + ".max"));
        }
        return p;
    }
};

// Fit the whole preprocessing chain on the given rows (outlier stats, then
// means over outlier-blanked data, then min/max over the imputed result).
// is_numeric marks columns eligible for MAD flagging.
inline PreprocessParams fit_preprocess(const Matrix& x, std::span<const std::size_t> rows,
                                       std::span<const std::uint8_t> is_numeric, double cutoff,
                                       bool outliers_enabled,
                                       std::vector<std::string>* log = nullptr) {
    PreprocessParams p;
    p.outlier_cutoff = cutoff;
    p.outliers_enabled = outliers_enabled;
    p.is_numeric.assign(is_numeric.begin(), is_numeric.end());
    p.outliers.resize(x.cols());

    Matrix sub = x.select_rows(rows);
    if (outliers_enabled) {
        for (std::size_t c = 0; c < sub.cols(); ++c) {
            if (!is_numeric[c]) continue;
            auto col = sub.column(c);
            p.outliers[c] = fit_outlier_stats(col);
            if (p.outliers[c].degenerate && log)
                log->push_back("column " + std::to_string(c) +
                               ": degenerate scale (MAD = 0), outliers not flagged");
            bool deg = false;
            auto mask = detect_outliers_mad(col, cutoff, &deg);
            for (std::size_t r = 0; r < sub.rows(); ++r)
                if (mask[r]) sub(r, c) = std::numeric_limits<double>::quiet_NaN();
        }
    }
    p.impute = fit_impute(sub);
    sub = impute_missing(std::move(sub), p.impute);
    p.normalize = fit_normalize(sub);
    return p;
}

// Apply fitted parameters to arbitrary rows: blank outliers by the training
// median/MAD, fill missing cells with training means, then min-max map.
inline Matrix apply_preprocess(Matrix x, const PreprocessParams& p,
                               std::size_t* out_of_range = nullptr) {
    if (p.outliers_enabled) {
        const double cutoff = p.outlier_cutoff;
        for (std::size_t c = 0; c < x.cols(); ++c) {
            if (!p.is_numeric[c] || p.outliers[c].degenerate) continue;
            const double scale = kMadScale * p.outliers[c].mad;
            for (std::size_t r = 0; r < x.rows(); ++r) {
                double v = x(r, c);
                if (std::isfinite(v) && std::fabs(v - p.outliers[c].median) / scale > cutoff)
                    x(r, c) = std::numeric_limits<double>::quiet_NaN();
            }
        }
    }
    x = impute_missing(std::move(x), p.impute);
    return normalize(std::move(x), p.normalize, out_of_range);
}

}  // namespace readmit
