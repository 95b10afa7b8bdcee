#pragma once

// Greedy ensemble selection over a pool of trained models, following the
// model-library approach: start from the best single model on a held-out
// selection metric, then repeatedly add (with replacement) whichever pool
// member most improves the metric of the probability-averaged ensemble.
// Ties always resolve to the lowest pool index, so selection is
// deterministic for a fixed pool order.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/evaluate.hpp"

namespace readmit {

// Metric over probability scores; larger is better.
using ScoreMetric = std::function<double(std::span<const double>, std::span<const int>)>;

inline double accuracy_metric(std::span<const double> scores, std::span<const int> truth) {
    auto cm = confusion(classify(scores), truth);
    return static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
}

inline double f1_metric(std::span<const double> scores, std::span<const int> truth) {
    auto r = metrics(confusion(classify(scores), truth));
    return r.f1.value_or(0.0);
}

struct EnsembleSelection {
    std::vector<std::size_t> members;  // pool indices, repeats allowed
    double metric = 0.0;               // achieved on the selection split
};

// pool_scores[i] holds model i's class-1 probabilities on the selection
// split. max_rounds bounds the number of additions after the initial pick.
inline EnsembleSelection greedy_ensemble(
    std::span<const std::vector<double>> pool_scores, std::span<const int> truth,
    const ScoreMetric& metric, std::size_t max_rounds = 10) {
    if (pool_scores.empty()) throw Error("greedy_ensemble: empty model pool");
    const std::size_t n = truth.size();
    for (const auto& s : pool_scores)
        if (s.size() != n) throw Error("greedy_ensemble: score length mismatch");

    EnsembleSelection sel;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < pool_scores.size(); ++i) {
        double m = metric(pool_scores[i], truth);
        if (m > best) {
            best = m;
            best_i = i;
        }
    }
    sel.members.push_back(best_i);
    sel.metric = best;

    std::vector<double> sum = pool_scores[best_i];
    std::vector<double> candidate(n);
    for (std::size_t round = 0; round < max_rounds; ++round) {
        double round_best = sel.metric;
        std::size_t round_pick = pool_scores.size();
        const double k = static_cast<double>(sel.members.size());
        for (std::size_t i = 0; i < pool_scores.size(); ++i) {
            for (std::size_t r = 0; r < n; ++r)
                candidate[r] = (sum[r] + pool_scores[i][r]) / (k + 1.0);
            double m = metric(candidate, truth);
            if (m > round_best) {
                round_best = m;
                round_pick = i;
            }
        }
        if (round_pick == pool_scores.size()) break;  // no strict improvement
        for (std::size_t r = 0; r < n; ++r) sum[r] += pool_scores[round_pick][r];
        sel.members.push_back(round_pick);
        sel.metric = round_best;
    }
    return sel;
}

// Mean of member scores for an already-selected ensemble on any split.
inline std::vector<double> ensemble_scores(std::span<const std::vector<double>> pool_scores,
                                           std::span<const std::size_t> members) {
    if (members.empty()) throw Error("ensemble_scores: no members");
    std::vector<double> out(pool_scores[members[0]].size(), 0.0);
    for (std::size_t i : members)
        for (std::size_t r = 0; r < out.size(); ++r) out[r] += pool_scores[i][r];
    for (double& v : out) v /= static_cast<double>(members.size());
    return out;
}

}  // namespace readmit
