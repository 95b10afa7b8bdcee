#pragma once

// Soft-margin kernel SVM trained by sequential minimal optimization.
// Labels are folded into the dual weights, so the decision function is
// f(x) = bias + sum_i w_i * K(x, sv_i) over the stored support vectors.
// Kernels: plain dot product, (1 + <x, z>)^d, and exp(-gamma * ||x - z||^2).
// Probability output comes from a logistic fit on the training decision
// values (Platt scaling, Newton iteration with backtracking).

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "readmit/core.hpp"

namespace readmit {

enum class KernelKind { Linear, Polynomial, Rbf };

inline std::string kernel_name(KernelKind k) {
    switch (k) {
        case KernelKind::Linear: return "linear";
        case KernelKind::Polynomial: return "polynomial";
        case KernelKind::Rbf: return "rbf";
    }
    return "?";
}

inline KernelKind kernel_from_name(std::string_view s) {
    std::string n = to_lower(s);
    if (n == "linear") return KernelKind::Linear;
    if (n == "polynomial" || n == "poly") return KernelKind::Polynomial;
    if (n == "rbf" || n == "radial") return KernelKind::Rbf;
    throw ConfigError("unknown kernel: " + std::string(s));
}

struct SvmParams {
    double c = 1.0;
    KernelKind kernel = KernelKind::Rbf;
    double gamma = 1.0;   // rbf
    int degree = 3;       // polynomial
    double tol = 1e-3;    // KKT violation tolerance
    std::size_t max_sweeps = 1000;
    std::uint64_t seed = 0x5eed;  // scan-start randomization in SMO
};

struct SvmDiagnostics {
    std::vector<double> alphas;
    std::size_t sweeps = 0;
    bool converged = true;
    double max_kkt_violation = 0.0;
};

class SvmModel {
public:
    static SvmModel train(const Matrix& x, std::span<const int> y, const SvmParams& params,
                          SvmDiagnostics* diag = nullptr) {
        if (x.rows() != y.size()) throw Error("svm training: row/label count mismatch");
        if (x.rows() == 0) throw Error("svm training: empty dataset");
        if (params.kernel == KernelKind::Rbf && !(params.gamma > 0.0))
            throw Error("svm training: gamma must be positive");
        if (params.kernel == KernelKind::Polynomial && params.degree < 1)
            throw Error("svm training: polynomial degree must be >= 1");
        if (!(params.c > 0.0)) throw Error("svm training: C must be positive");

        Smo smo(x, y, params);
        smo.solve();

        SvmModel m;
        m.kernel_ = params.kernel;
        m.gamma_ = params.gamma;
        m.degree_ = params.degree;
        m.c_ = params.c;
        m.bias_ = smo.b;
        m.n_features_ = x.cols();
        for (std::size_t i = 0; i < x.rows(); ++i) {
            if (smo.alpha[i] > 1e-12) {
                m.support_.push_row(x.row(i));
                m.weights_.push_back(smo.alpha[i] * smo.sy[i]);
            }
        }

        // Platt calibration on training decision values f_i = E_i + y_i.
        std::vector<double> f(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) f[i] = smo.err[i] + smo.sy[i];
        fit_platt(f, y, m.platt_a_, m.platt_b_);

        if (diag) {
            diag->alphas = smo.alpha;
            diag->sweeps = smo.sweeps;
            diag->converged = smo.converged;
            diag->max_kkt_violation = smo.max_violation();
        }
        return m;
    }

    double decision(std::span<const double> row) const {
        if (row.size() != n_features_) throw Error("svm predict: feature width mismatch");
        double f = bias_;
        for (std::size_t i = 0; i < weights_.size(); ++i)
            f += weights_[i] * kernel(row, support_.row(i));
        return f;
    }

    std::vector<double> decision_values(const Matrix& x) const {
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = decision(x.row(r));
        return out;
    }

    // P(class 1 | x) through the calibrated logistic map.
    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r)
            out[r] = 1.0 / (1.0 + std::exp(platt_a_ * decision(x.row(r)) + platt_b_));
        return out;
    }

    double kernel(std::span<const double> a, std::span<const double> b) const {
        return eval_kernel(kernel_, gamma_, degree_, a, b);
    }

    static double eval_kernel(KernelKind kind, double gamma, int degree,
                              std::span<const double> a, std::span<const double> b) {
        switch (kind) {
            case KernelKind::Linear: {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
                return s;
            }
            case KernelKind::Polynomial: {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
                double base = 1.0 + s, out = 1.0;
                for (int d = 0; d < degree; ++d) out *= base;
                return out;
            }
            case KernelKind::Rbf: {
                double s = 0.0;
                for (std::size_t i = 0; i < a.size(); ++i) {
                    double d = a[i] - b[i];
                    s += d * d;
                }
                return std::exp(-gamma * s);
            }
        }
        return 0.0;
    }

    const Matrix& support_vectors() const { return support_; }
    const std::vector<double>& dual_weights() const { return weights_; }
    double bias() const { return bias_; }
    double soft_margin_c() const { return c_; }
    KernelKind kernel_kind() const { return kernel_; }
    double gamma() const { return gamma_; }
    int degree() const { return degree_; }
    double platt_a() const { return platt_a_; }
    double platt_b() const { return platt_b_; }
    std::size_t feature_count() const { return n_features_; }

    void save(KvFile& kv, const std::string& prefix) const {
        kv.set(prefix + ".kernel", kernel_name(kernel_));
        kv.set(prefix + ".gamma", to_hexfloat(gamma_));
        kv.set_int(prefix + ".degree", degree_);
        kv.set(prefix + ".c", to_hexfloat(c_));
        kv.set(prefix + ".bias", to_hexfloat(bias_));
        kv.set(prefix + ".platt_a", to_hexfloat(platt_a_));
        kv.set(prefix + ".platt_b", to_hexfloat(platt_b_));
        kv.set_int(prefix + ".features", static_cast<long long>(n_features_));
        kv.set_int(prefix + ".support", static_cast<long long>(weights_.size()));
        for (std::size_t i = 0; i < weights_.size(); ++i) {
            std::string row = to_hexfloat(weights_[i]);
            for (double v : support_.row(i)) row += " " + to_hexfloat(v);
            kv.set(prefix + ".sv." + std::to_string(i), row);
        }
    }

    static SvmModel load(const KvFile& kv, const std::string& prefix) {
        SvmModel m;
        m.kernel_ = kernel_from_name(kv.get(prefix + ".kernel"));
        m.gamma_ = parse_double(kv.get(prefix + ".gamma"));
        m.degree_ = static_cast<int>(kv.get_int(prefix + ".degree"));
        m.c_ = parse_double(kv.get(prefix + ".c"));
        m.bias_ = parse_double(kv.get(prefix + ".bias"));
        m.platt_a_ = parse_double(kv.get(prefix + ".platt_a"));
        m.platt_b_ = parse_double(kv.get(prefix + ".platt_b"));
        m.n_features_ = static_cast<std::size_t>(kv.get_int(prefix + ".features"));
        std::size_t count = static_cast<std::size_t>(kv.get_int(prefix + ".support"));
        m.support_.set_cols(m.n_features_);
        for (std::size_t i = 0; i < count; ++i) {
            auto parts = split(kv.get(prefix + ".sv." + std::to_string(i)), ' ');
            if (parts.size() != m.n_features_ + 1)
                throw ParseError("malformed support vector record");
            m.weights_.push_back(parse_double(parts[0]));
            std::vector<double> row(m.n_features_);
            for (std::size_t c = 0; c < m.n_features_; ++c) row[c] = parse_double(parts[c + 1]);
            m.support_.push_row(row);
        }
        return m;
    }

private:
    // Platt's sigmoid fit (Lin/Weng/Keerthi variant): minimizes the
    // cross-entropy of 1 / (1 + exp(A*f + B)) against smoothed targets.
    static void fit_platt(std::span<const double> f, std::span<const int> y, double& a_out,
                          double& b_out) {
        const std::size_t n = f.size();
        double prior1 = 0.0;
        for (int v : y) prior1 += v;
        double prior0 = static_cast<double>(n) - prior1;
        const double hi = (prior1 + 1.0) / (prior1 + 2.0);
        const double lo = 1.0 / (prior0 + 2.0);
        std::vector<double> t(n);
        for (std::size_t i = 0; i < n; ++i) t[i] = y[i] ? hi : lo;

        auto objective = [&](double a, double b) {
            double v = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double fapb = f[i] * a + b;
                if (fapb >= 0)
                    v += t[i] * fapb + std::log1p(std::exp(-fapb));
                else
                    v += (t[i] - 1.0) * fapb + std::log1p(std::exp(fapb));
            }
            return v;
        };

        double a = 0.0, b = std::log((prior0 + 1.0) / (prior1 + 1.0));
        double fval = objective(a, b);
        const double sigma = 1e-12;
        for (int it = 0; it < 100; ++it) {
            double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double fapb = f[i] * a + b;
                double p, q;
                if (fapb >= 0) {
                    p = std::exp(-fapb) / (1.0 + std::exp(-fapb));
                    q = 1.0 / (1.0 + std::exp(-fapb));
                } else {
                    p = 1.0 / (1.0 + std::exp(fapb));
                    q = std::exp(fapb) / (1.0 + std::exp(fapb));
                }
                double d2 = p * q;
                h11 += f[i] * f[i] * d2;
                h22 += d2;
                h21 += f[i] * d2;
                double d1 = t[i] - p;
                g1 += f[i] * d1;
                g2 += d1;
            }
            if (std::fabs(g1) < 1e-5 && std::fabs(g2) < 1e-5) break;
            double det = h11 * h22 - h21 * h21;
            double da = -(h22 * g1 - h21 * g2) / det;
            double db = -(-h21 * g1 + h11 * g2) / det;
            double gd = g1 * da + g2 * db;
            double step = 1.0;
            while (step >= 1e-10) {
                double na = a + step * da, nb = b + step * db;
                double nf = objective(na, nb);
                if (nf < fval + 1e-4 * step * gd) {
                    a = na;
                    b = nb;
                    fval = nf;
                    break;
                }
                step /= 2.0;
            }
            if (step < 1e-10) break;
        }
        a_out = a;
        b_out = b;
    }

    // Platt's SMO with a full error cache.
    struct Smo {
        const Matrix& x;
        SvmParams params;
        std::vector<double> sy;     // labels as -1/+1
        std::vector<double> alpha;
        std::vector<double> err;    // E_i = f(x_i) - y_i
        double b = 0.0;
        std::size_t sweeps = 0;
        bool converged = true;
        Rng rng;

        Smo(const Matrix& x_, std::span<const int> y, const SvmParams& p)
            : x(x_), params(p), alpha(x_.rows(), 0.0), err(x_.rows()), rng(p.seed) {
            sy.resize(x.rows());
            for (std::size_t i = 0; i < x.rows(); ++i) sy[i] = y[i] ? 1.0 : -1.0;
            for (std::size_t i = 0; i < x.rows(); ++i) err[i] = -sy[i];  // f == 0 initially
        }

        double k(std::size_t i, std::size_t j) const {
            return eval_kernel(params.kernel, params.gamma, params.degree, x.row(i), x.row(j));
        }

        bool take_step(std::size_t i1, std::size_t i2) {
            if (i1 == i2) return false;
            double a1 = alpha[i1], a2 = alpha[i2];
            double y1 = sy[i1], y2 = sy[i2];
            double e1 = err[i1], e2 = err[i2];
            double s = y1 * y2;
            double lo, hi;
            const double c = params.c;
            if (y1 != y2) {
                lo = std::max(0.0, a2 - a1);
                hi = std::min(c, c + a2 - a1);
            } else {
                lo = std::max(0.0, a1 + a2 - c);
                hi = std::min(c, a1 + a2);
            }
            if (lo >= hi) return false;

            double k11 = k(i1, i1), k12 = k(i1, i2), k22 = k(i2, i2);
            double eta = k11 + k22 - 2.0 * k12;
            double a2new;
            if (eta > 0.0) {
                a2new = a2 + y2 * (e1 - e2) / eta;
                a2new = std::clamp(a2new, lo, hi);
            } else {
                // evaluate the dual objective at both clip ends
                double f1 = y1 * (e1 + b) - a1 * k11 - s * a2 * k12;
                double f2 = y2 * (e2 + b) - s * a1 * k12 - a2 * k22;
                double l1 = a1 + s * (a2 - lo);
                double h1 = a1 + s * (a2 - hi);
                double lobj = l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11 + 0.5 * lo * lo * k22 +
                              s * lo * l1 * k12;
                double hobj = h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11 + 0.5 * hi * hi * k22 +
                              s * hi * h1 * k12;
                const double e = 1e-12;
                if (lobj < hobj - e)
                    a2new = lo;
                else if (lobj > hobj + e)
                    a2new = hi;
                else
                    a2new = a2;
            }
            if (std::fabs(a2new - a2) < 1e-8 * (a2new + a2 + 1e-8)) return false;
            // snap near-bound values so alpha dust cannot masquerade as a
            // margin support vector
            const double snap = 1e-8 * c;
            if (a2new < snap)
                a2new = 0.0;
            else if (a2new > c - snap)
                a2new = c;
            double a1new = a1 + s * (a2 - a2new);
            if (a1new < snap)
                a1new = 0.0;
            else if (a1new > c - snap)
                a1new = c;

            double d1 = y1 * (a1new - a1);
            double d2 = y2 * (a2new - a2);
            double b1 = b - e1 - d1 * k11 - d2 * k12;
            double b2 = b - e2 - d1 * k12 - d2 * k22;
            double bnew;
            if (a1new > 0.0 && a1new < c)
                bnew = b1;
            else if (a2new > 0.0 && a2new < c)
                bnew = b2;
            else
                bnew = 0.5 * (b1 + b2);
            double db = bnew - b;

            for (std::size_t i = 0; i < x.rows(); ++i)
                err[i] += d1 * k(i1, i) + d2 * k(i2, i) + db;
            alpha[i1] = a1new;
            alpha[i2] = a2new;
            b = bnew;
            return true;
        }

        bool examine(std::size_t i2) {
            double y2 = sy[i2], a2 = alpha[i2], e2 = err[i2];
            double r2 = e2 * y2;
            const double c = params.c, tol = params.tol;
            if (!((r2 < -tol && a2 < c) || (r2 > tol && a2 > 0.0))) return false;

            // 1) best |E1 - E2| over non-bound alphas
            std::ptrdiff_t best = -1;
            double best_gap = -1.0;
            for (std::size_t i = 0; i < x.rows(); ++i) {
                if (alpha[i] > 0.0 && alpha[i] < c) {
                    double gap = std::fabs(err[i] - e2);
                    if (gap > best_gap) {
                        best_gap = gap;
                        best = static_cast<std::ptrdiff_t>(i);
                    }
                }
            }
            if (best >= 0 && take_step(static_cast<std::size_t>(best), i2)) return true;

            // 2) sweep non-bound alphas from a random start
            std::size_t n = x.rows();
            std::size_t start = rng.uniform_index(n);
            for (std::size_t off = 0; off < n; ++off) {
                std::size_t i = (start + off) % n;
                if (alpha[i] > 0.0 && alpha[i] < c && take_step(i, i2)) return true;
            }
            // 3) sweep everything from a random start
            start = rng.uniform_index(n);
            for (std::size_t off = 0; off < n; ++off) {
                std::size_t i = (start + off) % n;
                if (take_step(i, i2)) return true;
            }
            return false;
        }

        void solve() {
            std::size_t changed = 0;
            bool examine_all = true;
            while (changed > 0 || examine_all) {
                if (++sweeps > params.max_sweeps) {
                    converged = false;
                    break;
                }
                changed = 0;
                if (examine_all) {
                    for (std::size_t i = 0; i < x.rows(); ++i) changed += examine(i);
                } else {
                    for (std::size_t i = 0; i < x.rows(); ++i)
                        if (alpha[i] > 0.0 && alpha[i] < params.c) changed += examine(i);
                }
                if (examine_all)
                    examine_all = false;
                else if (changed == 0)
                    examine_all = true;
            }
        }

        double max_violation() const {
            double worst = 0.0;
            for (std::size_t i = 0; i < x.rows(); ++i) {
                double r = err[i] * sy[i];
                double v = 0.0;
                if (alpha[i] <= 0.0)
                    v = std::max(0.0, -r);
                else if (alpha[i] >= params.c)
                    v = std::max(0.0, r);
                else
                    v = std::fabs(r);
                worst = std::max(worst, v);
            }
            return worst;
        }
    };

    Matrix support_;
    std::vector<double> weights_;
    double bias_ = 0.0;
    KernelKind kernel_ = KernelKind::Rbf;
    double gamma_ = 1.0;
    int degree_ = 3;
    double c_ = 1.0;
    double platt_a_ = -1.0;
    double platt_b_ = 0.0;
    std::size_t n_features_ = 0;
};

}  // namespace readmit
