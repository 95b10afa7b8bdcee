#pragma once

// Real-valued genetic algorithm for hyperparameter tuning. Chromosomes are
// gene vectors bounded to [-10, 10]; a generation evaluates the whole
// population, then breeds the next one with linear-rank selection, local
// arithmetic crossover, uniform random mutation, clamp repair and elitism.
// A GeneDecoder maps raw genes onto named hyperparameter ranges (affine or
// log-affine), so the tuned quantities are configuration rather than code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "readmit/core.hpp"

namespace readmit {

using Chromosome = std::vector<double>;

struct GeneBounds {
    double lo = -10.0;
    double hi = 10.0;
};

struct GaConfig {
    std::size_t population = 15;
    std::size_t generations = 15;
    double crossover_probability = 0.8;
    double mutation_probability = 0.1;  // per gene
    double elite_fraction = 0.05;       // ceil(fraction * population) carried unchanged
    double selection_pressure = 1.5;    // linear-rank s in [1, 2]
    GeneBounds bounds;
    std::uint64_t seed = 1;
};

struct GaResult {
    Chromosome best;
    double best_fitness = 0.0;
    struct TracePoint {
        std::size_t generation = 0;
        double best = 0.0;
        double mean = 0.0;
        Chromosome best_genes;
    };
    std::vector<TracePoint> trace;
    std::size_t evaluations = 0;
};

// ---------------------------------------------------------------------------
// operators

// Selection probability linear in fitness rank: for rank i of N (best rank
// N-1), p(i) = (2-s)/N + 2 i (s-1) / (N (N-1)). Tied fitness values share
// the average probability of their rank span, so an all-equal population is
// sampled uniformly.
inline std::vector<double> rank_probabilities(std::span<const double> fitness, double s) {
    const std::size_t n = fitness.size();
    if (n == 0) throw Error("rank_probabilities: empty population");
    if (n == 1) return {1.0};
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
    auto p_of_rank = [&](std::size_t i) {
        double nd = static_cast<double>(n);
        return (2.0 - s) / nd +
               2.0 * static_cast<double>(i) * (s - 1.0) / (nd * (nd - 1.0));
    };
    std::vector<double> prob(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && fitness[order[j + 1]] == fitness[order[i]]) ++j;
        double sum = 0.0;
        for (std::size_t r = i; r <= j; ++r) sum += p_of_rank(r);
        double share = sum / static_cast<double>(j - i + 1);
        for (std::size_t r = i; r <= j; ++r) prob[order[r]] = share;
        i = j + 1;
    }
    return prob;
}

inline std::size_t sample_categorical(std::span<const double> prob, Rng& rng) {
    double u = rng.u01();
    double acc = 0.0;
    for (std::size_t i = 0; i < prob.size(); ++i) {
        acc += prob[i];
        if (u < acc) return i;
    }
    return prob.size() - 1;
}

inline std::pair<std::size_t, std::size_t> rank_select(std::span<const double> fitness,
                                                       double pressure, Rng& rng) {
    auto prob = rank_probabilities(fitness, pressure);
    std::size_t a = sample_categorical(prob, rng);
    std::size_t b = sample_categorical(prob, rng);
    return {a, b};
}

// Per-gene convex recombination; the second child is constructed as the
// parents' sum minus the first so each gene pair's total is preserved.
inline std::pair<double, double> crossover_gene(double g1, double g2, double lambda) {
    double c1 = lambda * g1 + (1.0 - lambda) * g2;
    double c2 = (g1 + g2) - c1;
    return {c1, c2};
}

inline std::pair<Chromosome, Chromosome> arithmetic_crossover(const Chromosome& p1,
                                                              const Chromosome& p2,
                                                              double probability, Rng& rng) {
    if (p1.size() != p2.size()) throw Error("crossover: gene length mismatch");
    Chromosome c1 = p1, c2 = p2;
    if (rng.u01() < probability) {
        for (std::size_t g = 0; g < p1.size(); ++g) {
            auto [a, b] = crossover_gene(p1[g], p2[g], rng.u01());
            c1[g] = a;
            c2[g] = b;
        }
    }
    return {std::move(c1), std::move(c2)};
}

inline Chromosome uniform_mutate(Chromosome c, double probability, const GeneBounds& bounds,
                                 Rng& rng) {
    for (double& g : c) {
        double u = rng.u01();
        double replacement = rng.uniform(bounds.lo, bounds.hi);
        if (u < probability) g = replacement;
    }
    return c;
}

inline Chromosome repair(Chromosome c, const GeneBounds& bounds) {
    for (double& g : c) g = std::clamp(g, bounds.lo, bounds.hi);
    return c;
}

// ---------------------------------------------------------------------------
// the loop

using FitnessFn = std::function<double(const Chromosome&)>;

// Maximizes fitness over gene vectors of the given length. Every individual
// of every generation is evaluated (population x generations calls); the
// elite slot carries the best individual into the next generation unchanged,
// so the best-fitness trace never decreases.
inline GaResult ga_tune(const FitnessFn& fitness, std::size_t gene_count,
                        const GaConfig& config) {
    if (config.population < 2) throw ConfigError("ga: population must be >= 2");
    if (config.generations < 1) throw ConfigError("ga: generations must be >= 1");
    if (gene_count < 1) throw ConfigError("ga: gene count must be >= 1");

    Rng rng(config.seed);
    std::vector<Chromosome> pop(config.population, Chromosome(gene_count));
    for (auto& c : pop)
        for (double& g : c) g = rng.uniform(config.bounds.lo, config.bounds.hi);

    const std::size_t elite =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(
                                     config.elite_fraction *
                                     static_cast<double>(config.population))));

    GaResult result;
    std::vector<double> fit(config.population);
    for (std::size_t gen = 1; gen <= config.generations; ++gen) {
        for (std::size_t i = 0; i < config.population; ++i) {
            fit[i] = fitness(pop[i]);
            ++result.evaluations;
        }
        std::vector<std::size_t> order(config.population);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return fit[a] > fit[b]; });

        GaResult::TracePoint tp;
        tp.generation = gen;
        tp.best = fit[order[0]];
        tp.mean = stats::mean(fit);
        tp.best_genes = pop[order[0]];
        result.trace.push_back(tp);
        if (gen == 1 || tp.best > result.best_fitness) {
            result.best_fitness = tp.best;
            result.best = pop[order[0]];
        }
        if (gen == config.generations) break;

        std::vector<Chromosome> next;
        next.reserve(config.population);
        for (std::size_t e = 0; e < elite && e < config.population; ++e)
            next.push_back(pop[order[e]]);
        while (next.size() < config.population) {
            auto [ia, ib] = rank_select(fit, config.selection_pressure, rng);
            auto [c1, c2] = arithmetic_crossover(pop[ia], pop[ib],
                                                 config.crossover_probability, rng);
            c1 = repair(uniform_mutate(std::move(c1), config.mutation_probability,
                                       config.bounds, rng),
                        config.bounds);
            c2 = repair(uniform_mutate(std::move(c2), config.mutation_probability,
                                       config.bounds, rng),
                        config.bounds);
            next.push_back(std::move(c1));
            if (next.size() < config.population) next.push_back(std::move(c2));
        }
        pop = std::move(next);
    }
    return result;
}

// ---------------------------------------------------------------------------
// gene decoding

enum class GeneMap { Affine, LogAffine };

struct GeneSpec {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    GeneMap map = GeneMap::Affine;
    bool integer = false;  // rounded half-up after mapping
};

struct GeneDecoder {
    std::vector<GeneSpec> genes;
    GeneBounds bounds;

    std::vector<double> decode(const Chromosome& c) const {
        if (c.size() != genes.size())
            throw Error("decode: chromosome length " + std::to_string(c.size()) +
                        " does not match decoder gene count " + std::to_string(genes.size()));
        std::vector<double> out(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            const GeneSpec& s = genes[i];
            double t = (c[i] - bounds.lo) / (bounds.hi - bounds.lo);
            double v;
            if (t <= 0.0)
                v = s.lo;
            else if (t >= 1.0)
                v = s.hi;
            else if (s.map == GeneMap::Affine)
                v = s.lo + t * (s.hi - s.lo);
            else
                v = std::exp(std::log(s.lo) + t * (std::log(s.hi) - std::log(s.lo)));
            if (s.integer) v = std::floor(v + 0.5);
            out[i] = v;
        }
        return out;
    }
};

}  // namespace readmit
