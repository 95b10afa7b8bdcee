#pragma once

// Dual feature selection. Boruta pits every real feature against "shadow"
// columns (freshly permuted copies appended each iteration) inside a random
// forest. Importance is the out-of-bag accuracy loss under permutation,
// summarized per forest as a Z-score (mean loss over trees divided by its
// standard deviation); a feature scores a hit whenever its Z beats the best
// shadow Z, and cumulative hits are tested against Binomial(n, 1/2) with a
// Bonferroni-corrected two-sided test. Stepwise selection is forward
// logistic regression with a backward purge, governed by two significance
// thresholds whose order is enforced to rule out add/remove cycling.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/models/forest.hpp"
#include "readmit/models/glm.hpp"

namespace readmit {

enum class BorutaDecision { Confirmed, Tentative, Rejected };

inline std::string boruta_decision_name(BorutaDecision d) {
    switch (d) {
        case BorutaDecision::Confirmed: return "confirmed";
        case BorutaDecision::Tentative: return "tentative";
        case BorutaDecision::Rejected: return "rejected";
    }
    return "?";
}

struct FeatureImportanceReport {
    struct Entry {
        std::string name;
        double mean_importance = 0.0;  // accuracy-loss units, over iterations
        double sd_importance = 0.0;
        double z = std::numeric_limits<double>::quiet_NaN();  // mean / sd
        std::size_t hits = 0;
        std::size_t iterations = 0;  // iterations this feature stayed active
        BorutaDecision decision = BorutaDecision::Tentative;
    };
    std::vector<Entry> features;
    std::vector<double> shadow_max_history;  // per iteration
    std::size_t iterations_run = 0;

    std::vector<std::string> confirmed() const {
        std::vector<std::string> out;
        for (const auto& f : features)
            if (f.decision == BorutaDecision::Confirmed) out.push_back(f.name);
        return out;
    }
};

struct BorutaConfig {
    std::size_t max_iterations = 100;
    double significance = 0.01;  // two-sided, Bonferroni-corrected over features
    std::size_t forest_trees = 50;
    std::size_t forest_min_node = 5;
    std::size_t features_per_split = 0;  // 0 = auto over the active+shadow pool
    std::uint64_t seed = 1;
};

inline FeatureImportanceReport boruta(const Matrix& x, std::span<const int> y,
                                      std::span<const std::string> names,
                                      const BorutaConfig& config) {
    const std::size_t p = x.cols();
    if (p < 2) throw Error("boruta: need at least 2 features");
    if (config.max_iterations < 1) throw Error("boruta: max_iterations must be >= 1");
    if (names.size() != p) throw Error("boruta: name/column count mismatch");
    {
        bool pos = false, neg = false;
        for (int v : y) (v ? pos : neg) = true;
        if (!pos || !neg) throw Error("boruta: both classes must be present");
    }

    std::vector<std::vector<double>> history(p);  // importances while active
    std::vector<std::size_t> hits(p, 0);
    std::vector<BorutaDecision> decision(p, BorutaDecision::Tentative);
    std::vector<bool> undecided(p, true);
    std::vector<std::size_t> active(p);
    for (std::size_t j = 0; j < p; ++j) active[j] = j;

    FeatureImportanceReport report;
    Rng root(config.seed);
    auto yd = to_double_labels(y);
    const std::size_t n = x.rows();

    for (std::size_t iter = 0; iter < config.max_iterations && !active.empty(); ++iter) {
        Rng iter_rng = root.derive(iter);

        // real columns plus one freshly permuted shadow per active column
        Matrix xs(n, 2 * active.size());
        std::vector<std::size_t> perm(n);
        for (std::size_t a = 0; a < active.size(); ++a) {
            for (std::size_t r = 0; r < n; ++r) {
                xs(r, a) = x(r, active[a]);
                perm[r] = r;
            }
            iter_rng.shuffle(perm);
            for (std::size_t r = 0; r < n; ++r)
                xs(r, active.size() + a) = x(perm[r], active[a]);
        }

        ForestParams fp;
        fp.trees = config.forest_trees;
        fp.min_node_size = config.forest_min_node;
        fp.features_per_split = config.features_per_split;
        ForestModel forest = ForestModel::train(xs, std::span<const double>(yd), fp,
                                                iter_rng.next());
        auto imp = forest.permutation_importance(xs, yd, iter_rng.next());
        auto z_of = [&](std::size_t col) {
            double sd = std::max(imp.sd[col], 1e-12);
            return imp.mean[col] / sd;
        };

        double shadow_max = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < active.size(); ++a)
            shadow_max = std::max(shadow_max, z_of(active.size() + a));
        report.shadow_max_history.push_back(shadow_max);

        for (std::size_t a = 0; a < active.size(); ++a) {
            std::size_t j = active[a];
            history[j].push_back(imp.mean[a]);
            if (z_of(a) > shadow_max) ++hits[j];
        }
        report.iterations_run = iter + 1;

        // cumulative binomial decision per still-undecided feature
        std::vector<std::size_t> next_active;
        for (std::size_t j : active) {
            std::size_t trials = history[j].size();
            if (undecided[j]) {
                double pval = stats::binom_two_sided_p(hits[j], trials) *
                              static_cast<double>(p);
                if (pval < config.significance) {
                    bool confirming = 2 * hits[j] > trials;
                    decision[j] = confirming ? BorutaDecision::Confirmed
                                             : BorutaDecision::Rejected;
                    undecided[j] = false;
                    if (!confirming) continue;  // rejected features leave the pool
                }
            }
            next_active.push_back(j);
        }
        active = std::move(next_active);

        bool any_undecided = false;
        for (std::size_t j : active) any_undecided = any_undecided || undecided[j];
        if (!any_undecided) break;
    }

    for (std::size_t j = 0; j < p; ++j) {
        FeatureImportanceReport::Entry e;
        e.name = names[j];
        e.iterations = history[j].size();
        e.hits = hits[j];
        e.decision = decision[j];
        if (!history[j].empty()) {
            e.mean_importance = stats::mean(history[j]);
            e.sd_importance = stats::sample_sd(history[j]);
            e.z = e.sd_importance > 0.0 ? e.mean_importance / e.sd_importance
                                        : std::numeric_limits<double>::quiet_NaN();
        }
        report.features.push_back(std::move(e));
    }
    return report;
}

// ---------------------------------------------------------------------------
// stepwise logistic selection

enum class StepAction { Add, Remove };

struct StepwiseTrace {
    struct Step {
        std::size_t step = 0;
        StepAction action = StepAction::Add;
        std::string feature;
        double p_value = 0.0;
    };
    std::vector<Step> steps;
    std::vector<std::string> selected;  // in final model order
    double alpha_enter = 0.05;
    double alpha_remove = 0.10;
};

// Forward steps add the candidate with the smallest Wald p-value below
// alpha_enter; after each addition any included feature whose p-value rises
// above alpha_remove is purged. alpha_enter < alpha_remove is required up
// front: with the thresholds inverted a feature could be re-added the moment
// it is removed, and the procedure would cycle.
inline StepwiseTrace stepwise_select(const Matrix& x, std::span<const int> y,
                                     std::span<const std::string> names, double alpha_enter,
                                     double alpha_remove) {
    if (!(alpha_enter < alpha_remove))
        throw ConfigError("stepwise: alpha_enter must be strictly below alpha_remove");
    if (names.size() != x.cols()) throw Error("stepwise: name/column count mismatch");

    StepwiseTrace trace;
    trace.alpha_enter = alpha_enter;
    trace.alpha_remove = alpha_remove;

    std::vector<std::size_t> included;
    std::vector<bool> in_model(x.cols(), false);
    GlmParams gp;  // unpenalized; separation falls back to a small ridge

    auto fit_on = [&](const std::vector<std::size_t>& cols) {
        Matrix sub = x.select_cols(cols);
        return GlmModel::train(sub, y, gp);
    };

    const std::size_t max_actions = 2 * x.cols() * std::max<std::size_t>(x.cols(), 8);
    std::size_t step_no = 0;
    bool changed = true;
    while (changed) {
        changed = false;

        // forward: best candidate by Wald p-value
        double best_p = std::numeric_limits<double>::infinity();
        std::size_t best_j = x.cols();
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (in_model[j]) continue;
            auto cols = included;
            cols.push_back(j);
            GlmModel m = fit_on(cols);
            double pj = m.wald_p_values()[cols.size()];  // candidate is last, after intercept
            if (pj < best_p) {
                best_p = pj;
                best_j = j;
            }
        }
        if (best_j < x.cols() && best_p < alpha_enter) {
            included.push_back(best_j);
            in_model[best_j] = true;
            trace.steps.push_back({++step_no, StepAction::Add, names[best_j], best_p});
            changed = true;
        }

        // backward: purge anything whose p-value drifted above alpha_remove
        bool purged = true;
        while (purged && !included.empty()) {
            purged = false;
            GlmModel m = fit_on(included);
            auto pv = m.wald_p_values();
            double worst_p = -1.0;
            std::size_t worst_pos = included.size();
            for (std::size_t k = 0; k < included.size(); ++k) {
                if (pv[k + 1] > worst_p) {
                    worst_p = pv[k + 1];
                    worst_pos = k;
                }
            }
            if (worst_pos < included.size() && worst_p > alpha_remove) {
                std::size_t j = included[worst_pos];
                included.erase(included.begin() + static_cast<std::ptrdiff_t>(worst_pos));
                in_model[j] = false;
                trace.steps.push_back({++step_no, StepAction::Remove, names[j], worst_p});
                changed = true;
                purged = true;
            }
        }

        if (trace.steps.size() > max_actions)
            throw Error("stepwise: action cap exceeded, procedure did not terminate");
    }

    for (std::size_t j : included) trace.selected.push_back(names[j]);
    return trace;
}

// ---------------------------------------------------------------------------
// consensus

// Intersection of Boruta-confirmed and stepwise-selected features, ordered by
// Boruta Z-score descending (ties and undefined Z fall back to name order).
inline std::vector<std::string> consensus(const FeatureImportanceReport& boruta_report,
                                          const StepwiseTrace& stepwise_trace) {
    std::vector<const FeatureImportanceReport::Entry*> picked;
    for (const auto& e : boruta_report.features) {
        if (e.decision != BorutaDecision::Confirmed) continue;
        for (const auto& s : stepwise_trace.selected)
            if (s == e.name) {
                picked.push_back(&e);
                break;
            }
    }
    std::sort(picked.begin(), picked.end(), [](const auto* a, const auto* b) {
        double za = std::isnan(a->z) ? -std::numeric_limits<double>::infinity() : a->z;
        double zb = std::isnan(b->z) ? -std::numeric_limits<double>::infinity() : b->z;
        if (za != zb) return za > zb;
        return a->name < b->name;
    });
    std::vector<std::string> out;
    for (const auto* e : picked) out.push_back(e->name);
    return out;
}

}  // namespace readmit
