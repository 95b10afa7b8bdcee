#pragma once

// Binary logistic regression fit by iteratively reweighted least squares.
// Supports an optional L2 penalty on the non-intercept coefficients, Wald
// standard errors from the observed information, and a penalized refit when
// perfect separation sends the unpenalized coefficients off to infinity.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "readmit/core.hpp"

namespace readmit {

// Dense symmetric positive-definite solve via Cholesky; a is n*n row-major
// and is overwritten with its factor. Throws on a non-SPD system.
inline std::vector<double> solve_spd(std::vector<double> a, std::vector<double> b,
                                     std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (d <= 0.0) throw Error("solve_spd: matrix not positive definite");
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {  // L y = b
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
        b[i] = s / a[i * n + i];
    }
    for (std::size_t ii = n; ii > 0; --ii) {  // L^T x = y
        std::size_t i = ii - 1;
        double s = b[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
        b[i] = s / a[i * n + i];
    }
    return b;
}

// Inverse of an SPD matrix by column solves; used for standard errors.
inline std::vector<double> invert_spd(const std::vector<double>& a, std::size_t n) {
    std::vector<double> inv(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        std::vector<double> e(n, 0.0);
        e[j] = 1.0;
        auto col = solve_spd(a, std::move(e), n);
        for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
    }
    return inv;
}

struct GlmParams {
    double l2 = 0.0;            // ridge on non-intercept coefficients
    double threshold = 0.5;     // decision threshold used by classify
    std::size_t max_iterations = 200;
    double tol = 1e-10;         // max coefficient change declaring convergence
};

class GlmModel {
public:
    static GlmModel train(const Matrix& x, std::span<const int> y, const GlmParams& params) {
        if (x.rows() != y.size()) throw Error("glm training: row/label count mismatch");
        if (x.rows() == 0) throw Error("glm training: empty dataset");
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                if (!std::isfinite(x(r, c))) throw Error("glm training: non-finite cell");

        GlmModel m = fit_irls(x, y, params, params.l2);
        // Unpenalized fits under perfect separation diverge; detect the
        // runaway coefficients and refit with a ridge. The fallback scales
        // with n so the refit keeps a finite optimum whose Wald statistics
        // remain usable (a vanishing penalty leaves near-infinite standard
        // errors and p-values of ~1 for a perfectly predictive feature).
        if (params.l2 == 0.0) {
            double mx = std::fabs(m.intercept_);
            for (double b : m.coef_) mx = std::max(mx, std::fabs(b));
            if (mx > 30.0 || !m.converged_) {
                m = fit_irls(x, y, params, 1e-3 * static_cast<double>(x.rows()));
                m.separation_fallback_ = true;
            }
        }
        return m;
    }

    std::vector<double> predict(const Matrix& x) const {
        if (x.cols() != coef_.size()) throw Error("glm predict: feature width mismatch");
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double eta = intercept_;
            auto row = x.row(r);
            for (std::size_t c = 0; c < coef_.size(); ++c) eta += coef_[c] * row[c];
            out[r] = sigmoid(eta);
        }
        return out;
    }

    // Penalized Bernoulli log-likelihood at the given coefficients.
    static double log_likelihood(const Matrix& x, std::span<const int> y, double intercept,
                                 std::span<const double> coef, double l2) {
        double ll = 0.0;
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double eta = intercept;
            auto row = x.row(r);
            for (std::size_t c = 0; c < coef.size(); ++c) eta += coef[c] * row[c];
            // log sigma(eta) and log(1 - sigma(eta)) without overflow
            double log_p = eta >= 0 ? -std::log1p(std::exp(-eta)) : eta - std::log1p(std::exp(eta));
            double log_q = eta >= 0 ? -eta - std::log1p(std::exp(-eta)) : -std::log1p(std::exp(eta));
            ll += y[r] ? log_p : log_q;
        }
        for (double b : coef) ll -= 0.5 * l2 * b * b;
        return ll;
    }

    // Analytic gradient of log_likelihood, intercept first.
    static std::vector<double> gradient(const Matrix& x, std::span<const int> y,
                                        double intercept, std::span<const double> coef,
                                        double l2) {
        std::vector<double> g(coef.size() + 1, 0.0);
        for (std::size_t r = 0; r < x.rows(); ++r) {
            double eta = intercept;
            auto row = x.row(r);
            for (std::size_t c = 0; c < coef.size(); ++c) eta += coef[c] * row[c];
            double resid = static_cast<double>(y[r]) - sigmoid(eta);
            g[0] += resid;
            for (std::size_t c = 0; c < coef.size(); ++c) g[c + 1] += resid * row[c];
        }
        for (std::size_t c = 0; c < coef.size(); ++c) g[c + 1] -= l2 * coef[c];
        return g;
    }

    // Two-sided Wald p-values, intercept first.
    std::vector<double> wald_p_values() const {
        std::vector<double> p(se_.size());
        for (std::size_t i = 0; i < se_.size(); ++i) {
            double b = i == 0 ? intercept_ : coef_[i - 1];
            if (se_[i] <= 0.0) {
                p[i] = 1.0;
                continue;
            }
            double z = std::fabs(b / se_[i]);
            p[i] = std::erfc(z / std::sqrt(2.0));  // 2 * (1 - Phi(z))
        }
        return p;
    }

    double intercept() const { return intercept_; }
    const std::vector<double>& coefficients() const { return coef_; }
    const std::vector<double>& standard_errors() const { return se_; }
    bool converged() const { return converged_; }
    std::size_t iterations() const { return iterations_; }
    bool separation_fallback() const { return separation_fallback_; }
    double l2_used() const { return l2_used_; }
    double threshold() const { return params_.threshold; }
    std::size_t feature_count() const { return coef_.size(); }

    void save(KvFile& kv, const std::string& prefix) const {
        kv.set_int(prefix + ".features", static_cast<long long>(coef_.size()));
        kv.set(prefix + ".intercept", to_hexfloat(intercept_));
        kv.set(prefix + ".l2", to_hexfloat(l2_used_));
        kv.set(prefix + ".threshold", to_hexfloat(params_.threshold));
        for (std::size_t i = 0; i < coef_.size(); ++i)
            kv.set(prefix + ".coef." + std::to_string(i), to_hexfloat(coef_[i]));
        for (std::size_t i = 0; i < se_.size(); ++i)
            kv.set(prefix + ".se." + std::to_string(i), to_hexfloat(se_[i]));
    }

    static GlmModel load(const KvFile& kv, const std::string& prefix) {
        GlmModel m;
        std::size_t p = static_cast<std::size_t>(kv.get_int(prefix + ".features"));
        m.intercept_ = parse_double(kv.get(prefix + ".intercept"));
        m.l2_used_ = parse_double(kv.get(prefix + ".l2"));
        m.params_.threshold = parse_double(kv.get(prefix + ".threshold"));
        m.coef_.resize(p);
        for (std::size_t i = 0; i < p; ++i)
            m.coef_[i] = parse_double(kv.get(prefix + ".coef." + std::to_string(i)));
        m.se_.resize(p + 1);
        for (std::size_t i = 0; i < p + 1; ++i)
            m.se_[i] = parse_double(kv.get(prefix + ".se." + std::to_string(i)));
        m.converged_ = true;
        return m;
    }

private:
    static GlmModel fit_irls(const Matrix& x, std::span<const int> y, const GlmParams& params,
                             double l2) {
        const std::size_t n = x.rows();
        const std::size_t p = x.cols() + 1;  // intercept first

        GlmModel m;
        m.params_ = params;
        m.l2_used_ = l2;
        std::vector<double> beta(p, 0.0);
        std::vector<double> a(p * p), rhs(p), eta(n), mu(n), w(n), z(n);

        m.converged_ = false;
        std::size_t it = 0;
        for (; it < params.max_iterations; ++it) {
            for (std::size_t r = 0; r < n; ++r) {
                double e = beta[0];
                auto row = x.row(r);
                for (std::size_t c = 1; c < p; ++c) e += beta[c] * row[c - 1];
                eta[r] = e;
                mu[r] = sigmoid(e);
                w[r] = std::max(mu[r] * (1.0 - mu[r]), 1e-10);
                z[r] = e + (static_cast<double>(y[r]) - mu[r]) / w[r];
            }
            build_normal_equations(x, w, z, l2, a, rhs);
            std::vector<double> next;
            try {
                next = solve_spd(a, rhs, p);
            } catch (const Error&) {
                // singular system (constant columns with zero penalty): nudge
                std::vector<double> jittered = a;
                for (std::size_t i = 0; i < p; ++i) jittered[i * p + i] += 1e-8;
                next = solve_spd(std::move(jittered), rhs, p);
            }
            double delta = 0.0;
            for (std::size_t c = 0; c < p; ++c) delta = std::max(delta, std::fabs(next[c] - beta[c]));
            beta = std::move(next);
            if (delta < params.tol) {
                m.converged_ = true;
                ++it;
                break;
            }
        }
        m.iterations_ = it;
        m.intercept_ = beta[0];
        m.coef_.assign(beta.begin() + 1, beta.end());

        // Standard errors from the (penalized) observed information.
        for (std::size_t r = 0; r < n; ++r) {
            double e = beta[0];
            auto row = x.row(r);
            for (std::size_t c = 1; c < p; ++c) e += beta[c] * row[c - 1];
            double muv = sigmoid(e);
            w[r] = std::max(muv * (1.0 - muv), 1e-10);
        }
        build_normal_equations(x, w, z, l2, a, rhs);
        m.se_.assign(p, 0.0);
        try {
            auto inv = invert_spd(a, p);
            for (std::size_t c = 0; c < p; ++c)
                m.se_[c] = inv[c * p + c] > 0.0 ? std::sqrt(inv[c * p + c]) : 0.0;
        } catch (const Error&) {
            // leave zero standard errors; Wald tests report p = 1
        }
        return m;
    }

    // a = X~' W X~ + l2 * R, rhs = X~' W z with X~ = [1 | X] and R zeroing
    // the intercept row.
    static void build_normal_equations(const Matrix& x, std::span<const double> w,
                                       std::span<const double> z, double l2,
                                       std::vector<double>& a, std::vector<double>& rhs) {
        const std::size_t n = x.rows();
        const std::size_t p = x.cols() + 1;
        std::fill(a.begin(), a.end(), 0.0);
        std::fill(rhs.begin(), rhs.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            auto row = x.row(r);
            double wr = w[r];
            double wz = wr * z[r];
            a[0] += wr;
            rhs[0] += wz;
            for (std::size_t i = 1; i < p; ++i) {
                double xi = row[i - 1];
                a[i * p + 0] += wr * xi;
                rhs[i] += wz * xi;
                for (std::size_t j = 1; j <= i; ++j) a[i * p + j] += wr * xi * row[j - 1];
            }
        }
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = i + 1; j < p; ++j) a[i * p + j] = a[j * p + i];
        for (std::size_t i = 1; i < p; ++i) a[i * p + i] += l2;
    }

    GlmParams params_;
    double intercept_ = 0.0;
    std::vector<double> coef_;
    std::vector<double> se_;
    bool converged_ = false;
    std::size_t iterations_ = 0;
    bool separation_fallback_ = false;
    double l2_used_ = 0.0;
};

}  // namespace readmit
