#pragma once

// End-to-end pipeline orchestration: a sectioned plain-text config, the
// staged artifact layout, and a manifest with checksums so identical
// (config, seeds, input) runs produce byte-identical bundles. Stages
// communicate through files in the output directory, which makes every
// subcommand runnable on its own.
//
// Default order is leak-free: split indices are drawn first, every parameter
// is fit on training rows only, and rebalancing touches training rows only.
// The paper_order switch reproduces the alternative sequence in which the
// whole table is balanced before partitioning; test rows then contain
// duplicated minority rows, which inflates test metrics.

#include <chrono>
#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "readmit/core.hpp"
#include "readmit/csv.hpp"
#include "readmit/ensemble.hpp"
#include "readmit/evaluate.hpp"
#include "readmit/feature_select.hpp"
#include "readmit/ga.hpp"
#include "readmit/ingest.hpp"
#include "readmit/models/model.hpp"
#include "readmit/preprocess.hpp"
#include "readmit/version.hpp"

namespace readmit {

// ---------------------------------------------------------------------------
// configuration

struct PipelineConfig {
    // [data]
    std::string input;
    std::string missing_marker = "?";
    IngestRoles roles;
    std::vector<std::string> excluded_dispositions = {"11", "13", "14", "19", "20", "21"};
    std::vector<std::string> force_categorical;
    std::vector<std::string> drop_columns = {"weight", "payer_code"};
    double max_missing_fraction = 0.5;
    std::size_t max_levels = 100;
    LabelPolicy label_policy = LabelPolicy::Under30;

    // [preprocess]
    double outlier_cutoff = 3.0;
    bool outliers_enabled = true;

    // [split]
    double split_ratio = 0.70;
    std::uint64_t split_seed = 42;

    // [balance]
    SamplingStrategy strategy = SamplingStrategy::Undersample;
    double rose_shrink = 1.0;
    std::uint64_t balance_seed = 43;
    bool paper_order = false;

    // [features]
    bool features_enabled = true;
    std::size_t boruta_iterations = 40;
    std::size_t boruta_trees = 40;
    std::size_t boruta_min_node = 5;
    double boruta_significance = 0.01;
    std::uint64_t features_seed = 45;
    double alpha_enter = 0.05;
    double alpha_remove = 0.10;
    std::string feature_apply = "consensus";  // consensus | boruta | stepwise | none

    // [models]
    std::vector<ModelFamily> families = {ModelFamily::Cart, ModelFamily::Forest,
                                         ModelFamily::Gbm, ModelFamily::Glm, ModelFamily::Svm};
    CartHp cart;
    ForestHp forest;
    GbmHp gbm;
    GlmHp glm;
    SvmHp svm;
    std::uint64_t train_seed = 44;

    // [tune]
    bool tune_enabled = true;
    std::vector<ModelFamily> tune_families = {ModelFamily::Gbm, ModelFamily::Glm,
                                              ModelFamily::Svm, ModelFamily::Cart};
    GaConfig ga;  // population 15, generations 15, pc 0.8, pm 0.1, elite 5%
    double validation_fraction = 0.2;
    std::uint64_t validation_seed = 46;
    std::map<std::string, GeneDecoder> decoders;  // family name -> 2-gene decoder

    // [ensemble]
    bool ensemble_enabled = true;
    std::string ensemble_metric = "accuracy";  // accuracy | f1
    std::size_t ensemble_max_rounds = 10;

    // [evaluate]
    bool compare_sampling_enabled = true;
    ModelFamily sampling_family = ModelFamily::Gbm;
    std::vector<std::pair<std::string, std::string>> interactions = {
        {"number_inpatient", "number_outpatient"},
        {"number_inpatient", "number_diagnoses"}};

    // [output]
    std::string output_dir = "out";

    // [debug] replaces test-partition rows with garbage right after the
    // split is drawn; training-side artifacts must be unaffected
    bool poison_test_rows = false;

    PipelineConfig() { decoders = default_decoders(); }

    static std::map<std::string, GeneDecoder> default_decoders() {
        std::map<std::string, GeneDecoder> d;
        d["gbm"].genes = {{"learning_rate", 0.01, 1.0, GeneMap::LogAffine, false},
                          {"max_depth", 1, 8, GeneMap::Affine, true}};
        d["glm"].genes = {{"l2", 1e-6, 10.0, GeneMap::LogAffine, false},
                          {"threshold", 0.05, 0.95, GeneMap::Affine, false}};
        d["svm"].genes = {{"c", 0.01, 100.0, GeneMap::LogAffine, false},
                          {"gamma", 0.001, 10.0, GeneMap::LogAffine, false}};
        d["cart"].genes = {{"complexity", 1e-6, 0.1, GeneMap::LogAffine, false},
                           {"min_node_size", 1, 50, GeneMap::Affine, true}};
        d["forest"].genes = {{"trees", 20, 300, GeneMap::Affine, true},
                             {"features_per_split", 1, 16, GeneMap::Affine, true}};
        return d;
    }

    static PipelineConfig from_file(const std::string& path);
    static PipelineConfig from_kv(const KvFile& kv);
    KvFile to_kv() const;  // resolved snapshot, embedded in the manifest
    void validate() const;
};

namespace detail {

inline std::vector<std::string> parse_list(const std::string& s) {
    std::vector<std::string> out;
    for (auto& part : split(s, ',')) {
        std::string t = trim(part);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

inline std::vector<ModelFamily> parse_families(const std::string& s) {
    std::vector<ModelFamily> out;
    for (const auto& name : parse_list(s)) out.push_back(family_from_name(name));
    return out;
}

inline std::string families_to_string(std::span<const ModelFamily> fams) {
    std::vector<std::string> names;
    for (auto f : fams) names.push_back(family_name(f));
    return join(names, ",");
}

inline GeneSpec parse_gene_spec(const std::string& name, const std::string& value) {
    auto parts = parse_list(value);
    // also accept whitespace-separated
    if (parts.size() == 1) {
        parts.clear();
        for (auto& p : split(value, ' '))
            if (!trim(p).empty()) parts.push_back(trim(p));
    }
    if (parts.size() != 3)
        throw ConfigError("gene spec for " + name + " must be '<map> <lo> <hi>'");
    GeneSpec spec;
    spec.name = name;
    std::string kind = to_lower(parts[0]);
    if (kind == "affine") {
        spec.map = GeneMap::Affine;
    } else if (kind == "log") {
        spec.map = GeneMap::LogAffine;
    } else if (kind == "int") {
        spec.map = GeneMap::Affine;
        spec.integer = true;
    } else if (kind == "log_int") {
        spec.map = GeneMap::LogAffine;
        spec.integer = true;
    } else {
        throw ConfigError("unknown gene map kind: " + kind);
    }
    spec.lo = parse_double(parts[1], name);
    spec.hi = parse_double(parts[2], name);
    if (!(spec.lo <= spec.hi)) throw ConfigError("gene spec for " + name + ": lo > hi");
    return spec;
}

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "data.input", "data.missing_marker", "data.encounter_column", "data.patient_column",
        "data.label_column", "data.disposition_column", "data.excluded_dispositions",
        "data.force_categorical", "data.drop_columns", "data.max_missing_fraction",
        "data.max_levels", "data.label_policy",
        "preprocess.outlier_cutoff", "preprocess.outliers_enabled",
        "split.ratio", "split.seed",
        "balance.strategy", "balance.rose_shrink", "balance.seed", "balance.paper_order",
        "features.enabled", "features.boruta_iterations", "features.boruta_trees",
        "features.boruta_min_node", "features.significance", "features.alpha_enter",
        "features.alpha_remove", "features.apply", "features.seed",
        "models.families", "models.seed", "models.cart_complexity", "models.cart_min_node",
        "models.forest_trees", "models.forest_m", "models.gbm_learning_rate",
        "models.gbm_stages", "models.gbm_depth", "models.gbm_loss", "models.glm_l2",
        "models.glm_threshold",
        "models.svm_c", "models.svm_gamma", "models.svm_kernel", "models.svm_degree",
        "tune.enabled", "tune.families", "tune.population", "tune.generations",
        "tune.crossover", "tune.mutation", "tune.elite_fraction", "tune.pressure",
        "tune.seed", "tune.validation_fraction", "tune.validation_seed",
        "ensemble.enabled", "ensemble.metric", "ensemble.max_rounds",
        "evaluate.compare_sampling", "evaluate.sampling_family", "evaluate.interactions",
        "output.dir",
        "debug.poison_test_rows",
    };
    return keys;
}

}  // namespace detail

inline PipelineConfig PipelineConfig::from_kv(const KvFile& kv) {
    for (const auto& [key, value] : kv.items()) {
        (void)value;
        if (detail::known_config_keys().count(key)) continue;
        if (key.rfind("tune.decode.", 0) == 0) continue;
        throw ConfigError("unknown config key: " + key);
    }

    PipelineConfig c;
    c.input = kv.get_or("data.input", c.input);
    c.missing_marker = kv.get_or("data.missing_marker", c.missing_marker);
    c.roles.encounter_column = kv.get_or("data.encounter_column", c.roles.encounter_column);
    c.roles.patient_column = kv.get_or("data.patient_column", c.roles.patient_column);
    c.roles.label_column = kv.get_or("data.label_column", c.roles.label_column);
    c.roles.disposition_column =
        kv.get_or("data.disposition_column", c.roles.disposition_column);
    if (kv.has("data.excluded_dispositions"))
        c.excluded_dispositions = detail::parse_list(kv.get("data.excluded_dispositions"));
    if (kv.has("data.force_categorical"))
        c.force_categorical = detail::parse_list(kv.get("data.force_categorical"));
    if (kv.has("data.drop_columns"))
        c.drop_columns = detail::parse_list(kv.get("data.drop_columns"));
    c.max_missing_fraction = kv.get_double_or("data.max_missing_fraction", c.max_missing_fraction);
    c.max_levels = static_cast<std::size_t>(kv.get_int_or("data.max_levels",
                                                          static_cast<long long>(c.max_levels)));
    if (kv.has("data.label_policy"))
        c.label_policy = label_policy_from_name(kv.get("data.label_policy"));

    c.outlier_cutoff = kv.get_double_or("preprocess.outlier_cutoff", c.outlier_cutoff);
    c.outliers_enabled = kv.get_bool_or("preprocess.outliers_enabled", c.outliers_enabled);

    c.split_ratio = kv.get_double_or("split.ratio", c.split_ratio);
    c.split_seed = static_cast<std::uint64_t>(kv.get_int_or("split.seed",
                                                            static_cast<long long>(c.split_seed)));

    if (kv.has("balance.strategy")) c.strategy = strategy_from_name(kv.get("balance.strategy"));
    c.rose_shrink = kv.get_double_or("balance.rose_shrink", c.rose_shrink);
    c.balance_seed = static_cast<std::uint64_t>(
        kv.get_int_or("balance.seed", static_cast<long long>(c.balance_seed)));
    c.paper_order = kv.get_bool_or("balance.paper_order", c.paper_order);

    c.features_enabled = kv.get_bool_or("features.enabled", c.features_enabled);
    c.boruta_iterations = static_cast<std::size_t>(
        kv.get_int_or("features.boruta_iterations", static_cast<long long>(c.boruta_iterations)));
    c.boruta_trees = static_cast<std::size_t>(
        kv.get_int_or("features.boruta_trees", static_cast<long long>(c.boruta_trees)));
    c.boruta_min_node = static_cast<std::size_t>(
        kv.get_int_or("features.boruta_min_node", static_cast<long long>(c.boruta_min_node)));
    c.boruta_significance = kv.get_double_or("features.significance", c.boruta_significance);
    c.alpha_enter = kv.get_double_or("features.alpha_enter", c.alpha_enter);
    c.alpha_remove = kv.get_double_or("features.alpha_remove", c.alpha_remove);
    c.feature_apply = kv.get_or("features.apply", c.feature_apply);
    c.features_seed = static_cast<std::uint64_t>(
        kv.get_int_or("features.seed", static_cast<long long>(c.features_seed)));

    if (kv.has("models.families")) c.families = detail::parse_families(kv.get("models.families"));
    c.train_seed = static_cast<std::uint64_t>(
        kv.get_int_or("models.seed", static_cast<long long>(c.train_seed)));
    c.cart.complexity = kv.get_double_or("models.cart_complexity", c.cart.complexity);
    c.cart.min_node_size = static_cast<std::size_t>(
        kv.get_int_or("models.cart_min_node", static_cast<long long>(c.cart.min_node_size)));
    c.forest.trees = static_cast<std::size_t>(
        kv.get_int_or("models.forest_trees", static_cast<long long>(c.forest.trees)));
    c.forest.features_per_split = static_cast<std::size_t>(kv.get_int_or(
        "models.forest_m", static_cast<long long>(c.forest.features_per_split)));
    c.gbm.learning_rate = kv.get_double_or("models.gbm_learning_rate", c.gbm.learning_rate);
    c.gbm.stages = static_cast<std::size_t>(
        kv.get_int_or("models.gbm_stages", static_cast<long long>(c.gbm.stages)));
    c.gbm.max_depth = static_cast<std::size_t>(
        kv.get_int_or("models.gbm_depth", static_cast<long long>(c.gbm.max_depth)));
    if (kv.has("models.gbm_loss")) c.gbm.loss = gbm_loss_from_name(kv.get("models.gbm_loss"));
    c.glm.l2 = kv.get_double_or("models.glm_l2", c.glm.l2);
    c.glm.threshold = kv.get_double_or("models.glm_threshold", c.glm.threshold);
    c.svm.c = kv.get_double_or("models.svm_c", c.svm.c);
    c.svm.gamma = kv.get_double_or("models.svm_gamma", c.svm.gamma);
    if (kv.has("models.svm_kernel")) c.svm.kernel = kernel_from_name(kv.get("models.svm_kernel"));
    c.svm.degree = static_cast<int>(kv.get_int_or("models.svm_degree", c.svm.degree));

    c.tune_enabled = kv.get_bool_or("tune.enabled", c.tune_enabled);
    if (kv.has("tune.families")) c.tune_families = detail::parse_families(kv.get("tune.families"));
    c.ga.population = static_cast<std::size_t>(
        kv.get_int_or("tune.population", static_cast<long long>(c.ga.population)));
    c.ga.generations = static_cast<std::size_t>(
        kv.get_int_or("tune.generations", static_cast<long long>(c.ga.generations)));
    c.ga.crossover_probability = kv.get_double_or("tune.crossover", c.ga.crossover_probability);
    c.ga.mutation_probability = kv.get_double_or("tune.mutation", c.ga.mutation_probability);
    c.ga.elite_fraction = kv.get_double_or("tune.elite_fraction", c.ga.elite_fraction);
    c.ga.selection_pressure = kv.get_double_or("tune.pressure", c.ga.selection_pressure);
    c.ga.seed = static_cast<std::uint64_t>(
        kv.get_int_or("tune.seed", static_cast<long long>(c.ga.seed)));
    c.validation_fraction = kv.get_double_or("tune.validation_fraction", c.validation_fraction);
    c.validation_seed = static_cast<std::uint64_t>(
        kv.get_int_or("tune.validation_seed", static_cast<long long>(c.validation_seed)));
    for (const auto& [key, value] : kv.items()) {
        if (key.rfind("tune.decode.", 0) != 0) continue;
        auto rest = key.substr(std::string("tune.decode.").size());
        auto dot = rest.find('.');
        if (dot == std::string::npos)
            throw ConfigError("decoder key must be tune.decode.<family>.<param>: " + key);
        std::string fam = rest.substr(0, dot);
        std::string param = rest.substr(dot + 1);
        family_from_name(fam);  // validates
        auto& dec = c.decoders[fam];
        GeneSpec spec = detail::parse_gene_spec(param, value);
        bool replaced = false;
        for (auto& g : dec.genes)
            if (g.name == param) {
                g = spec;
                replaced = true;
            }
        if (!replaced) dec.genes.push_back(spec);
    }

    c.ensemble_enabled = kv.get_bool_or("ensemble.enabled", c.ensemble_enabled);
    c.ensemble_metric = kv.get_or("ensemble.metric", c.ensemble_metric);
    c.ensemble_max_rounds = static_cast<std::size_t>(
        kv.get_int_or("ensemble.max_rounds", static_cast<long long>(c.ensemble_max_rounds)));

    c.compare_sampling_enabled =
        kv.get_bool_or("evaluate.compare_sampling", c.compare_sampling_enabled);
    if (kv.has("evaluate.sampling_family"))
        c.sampling_family = family_from_name(kv.get("evaluate.sampling_family"));
    if (kv.has("evaluate.interactions")) {
        c.interactions.clear();
        for (const auto& pair : detail::parse_list(kv.get("evaluate.interactions"))) {
            auto ab = split(pair, ':');
            if (ab.size() != 2)
                throw ConfigError("interaction pair must be '<a>:<b>': " + pair);
            c.interactions.emplace_back(trim(ab[0]), trim(ab[1]));
        }
    }

    c.output_dir = kv.get_or("output.dir", c.output_dir);
    c.poison_test_rows = kv.get_bool_or("debug.poison_test_rows", c.poison_test_rows);
    return c;
}

inline PipelineConfig PipelineConfig::from_file(const std::string& path) {
    return from_kv(KvFile::load(path, /*sections=*/true));
}

inline KvFile PipelineConfig::to_kv() const {
    KvFile kv;
    kv.set("data.input", input);
    kv.set("data.missing_marker", missing_marker);
    kv.set("data.encounter_column", roles.encounter_column);
    kv.set("data.patient_column", roles.patient_column);
    kv.set("data.label_column", roles.label_column);
    kv.set("data.disposition_column", roles.disposition_column);
    kv.set("data.excluded_dispositions", join(excluded_dispositions, ","));
    kv.set("data.force_categorical", join(force_categorical, ","));
    kv.set("data.drop_columns", join(drop_columns, ","));
    kv.set("data.max_missing_fraction", format_double(max_missing_fraction));
    kv.set_int("data.max_levels", static_cast<long long>(max_levels));
    kv.set("data.label_policy", label_policy_name(label_policy));
    kv.set("preprocess.outlier_cutoff", format_double(outlier_cutoff));
    kv.set("preprocess.outliers_enabled", outliers_enabled ? "true" : "false");
    kv.set("split.ratio", format_double(split_ratio));
    kv.set_int("split.seed", static_cast<long long>(split_seed));
    kv.set("balance.strategy", strategy_name(strategy));
    kv.set("balance.rose_shrink", format_double(rose_shrink));
    kv.set_int("balance.seed", static_cast<long long>(balance_seed));
    kv.set("balance.paper_order", paper_order ? "true" : "false");
    kv.set("features.enabled", features_enabled ? "true" : "false");
    kv.set_int("features.boruta_iterations", static_cast<long long>(boruta_iterations));
    kv.set_int("features.boruta_trees", static_cast<long long>(boruta_trees));
    kv.set_int("features.boruta_min_node", static_cast<long long>(boruta_min_node));
    kv.set("features.significance", format_double(boruta_significance));
    kv.set("features.alpha_enter", format_double(alpha_enter));
    kv.set("features.alpha_remove", format_double(alpha_remove));
    kv.set("features.apply", feature_apply);
    kv.set_int("features.seed", static_cast<long long>(features_seed));
    kv.set("models.families", detail::families_to_string(families));
    kv.set_int("models.seed", static_cast<long long>(train_seed));
    kv.set("models.cart_complexity", format_double(cart.complexity));
    kv.set_int("models.cart_min_node", static_cast<long long>(cart.min_node_size));
    kv.set_int("models.forest_trees", static_cast<long long>(forest.trees));
    kv.set_int("models.forest_m", static_cast<long long>(forest.features_per_split));
    kv.set("models.gbm_learning_rate", format_double(gbm.learning_rate));
    kv.set_int("models.gbm_stages", static_cast<long long>(gbm.stages));
    kv.set_int("models.gbm_depth", static_cast<long long>(gbm.max_depth));
    kv.set("models.gbm_loss", gbm_loss_name(gbm.loss));
    kv.set("models.glm_l2", format_double(glm.l2));
    kv.set("models.glm_threshold", format_double(glm.threshold));
    kv.set("models.svm_c", format_double(svm.c));
    kv.set("models.svm_gamma", format_double(svm.gamma));
    kv.set("models.svm_kernel", kernel_name(svm.kernel));
    kv.set_int("models.svm_degree", svm.degree);
    kv.set("tune.enabled", tune_enabled ? "true" : "false");
    kv.set("tune.families", detail::families_to_string(tune_families));
    kv.set_int("tune.population", static_cast<long long>(ga.population));
    kv.set_int("tune.generations", static_cast<long long>(ga.generations));
    kv.set("tune.crossover", format_double(ga.crossover_probability));
    kv.set("tune.mutation", format_double(ga.mutation_probability));
    kv.set("tune.elite_fraction", format_double(ga.elite_fraction));
    kv.set("tune.pressure", format_double(ga.selection_pressure));
    kv.set_int("tune.seed", static_cast<long long>(ga.seed));
    kv.set("tune.validation_fraction", format_double(validation_fraction));
    kv.set_int("tune.validation_seed", static_cast<long long>(validation_seed));
    for (const auto& [fam, dec] : decoders) {
        for (const auto& g : dec.genes) {
            std::string kind = g.map == GeneMap::Affine ? (g.integer ? "int" : "affine")
                                                        : (g.integer ? "log_int" : "log");
            kv.set("tune.decode." + fam + "." + g.name,
                   kind + " " + format_double(g.lo) + " " + format_double(g.hi));
        }
    }
    kv.set("ensemble.enabled", ensemble_enabled ? "true" : "false");
    kv.set("ensemble.metric", ensemble_metric);
    kv.set_int("ensemble.max_rounds", static_cast<long long>(ensemble_max_rounds));
    kv.set("evaluate.compare_sampling", compare_sampling_enabled ? "true" : "false");
    kv.set("evaluate.sampling_family", family_name(sampling_family));
    {
        std::vector<std::string> pairs;
        for (const auto& [a, b] : interactions) pairs.push_back(a + ":" + b);
        kv.set("evaluate.interactions", join(pairs, ","));
    }
    kv.set("output.dir", output_dir);
    kv.set("debug.poison_test_rows", poison_test_rows ? "true" : "false");
    return kv;
}

inline void PipelineConfig::validate() const {
    if (input.empty()) throw ConfigError("data.input is required");
    if (!std::filesystem::exists(input))
        throw ConfigError("data.input does not exist: " + input);
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
        throw ConfigError("split.ratio must be in (0, 1)");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw ConfigError("tune.validation_fraction must be in (0, 1)");
    if (!(alpha_enter < alpha_remove))
        throw ConfigError("features.alpha_enter must be below features.alpha_remove");
    if (feature_apply != "consensus" && feature_apply != "boruta" &&
        feature_apply != "stepwise" && feature_apply != "none")
        throw ConfigError("features.apply must be consensus|boruta|stepwise|none");
    if (ensemble_metric != "accuracy" && ensemble_metric != "f1")
        throw ConfigError("ensemble.metric must be accuracy|f1");
    if (families.empty()) throw ConfigError("models.families must not be empty");
    if (paper_order && poison_test_rows)
        throw ConfigError("debug.poison_test_rows is meaningless under balance.paper_order");
    for (const auto& [fam, dec] : decoders) {
        if (dec.genes.size() != 2)
            throw ConfigError("decoder for " + fam + " must define exactly 2 genes, has " +
                              std::to_string(dec.genes.size()));
    }
    if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

// ---------------------------------------------------------------------------
// artifact names

namespace artifact {
inline constexpr const char* kCohortCsv = "cohort.csv";
inline constexpr const char* kCohortMeta = "cohort.meta";
inline constexpr const char* kSplit = "split.txt";
inline constexpr const char* kParams = "preprocess_params.txt";
inline constexpr const char* kTrain = "train.csv";
inline constexpr const char* kTest = "test.csv";
inline constexpr const char* kBoruta = "boruta_report.csv";
inline constexpr const char* kBorutaShadow = "boruta_shadow.csv";
inline constexpr const char* kStepwise = "stepwise_trace.csv";
inline constexpr const char* kConsensus = "consensus.txt";
inline constexpr const char* kSelected = "selected_columns.txt";
inline constexpr const char* kModelMetrics = "model_metrics.csv";
inline constexpr const char* kTunedMetrics = "tuned_metrics.csv";
inline constexpr const char* kTunedParams = "tuned_params.txt";
inline constexpr const char* kEnsemble = "ensemble.txt";
inline constexpr const char* kSamplingComparison = "sampling_comparison.csv";
inline constexpr const char* kInteractions = "interaction_grids.csv";
inline constexpr const char* kMetricsSummary = "metrics_summary.txt";
inline constexpr const char* kManifest = "manifest.txt";
inline constexpr const char* kTimings = "timings.txt";
}  // namespace artifact

// ---------------------------------------------------------------------------
// labelled matrices on disk (train/test artifacts)

struct LabelledMatrix {
    std::vector<std::string> names;
    Matrix x;
    std::vector<int> y;
};

inline void save_labelled_matrix(const std::string& path, const LabelledMatrix& m) {
    std::ostringstream out;
    std::vector<std::string> header = m.names;
    header.push_back("label");
    write_csv_row(out, header);
    std::vector<std::string> fields(header.size());
    for (std::size_t r = 0; r < m.x.rows(); ++r) {
        for (std::size_t c = 0; c < m.x.cols(); ++c) fields[c] = format_double(m.x(r, c));
        fields[m.x.cols()] = std::to_string(m.y[r]);
        write_csv_row(out, fields);
    }
    write_file(path, out.str());
}

inline LabelledMatrix load_labelled_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    LabelledMatrix m;
    bool header_seen = false;
    std::vector<std::vector<double>> rows;
    for_each_csv_record(in, [&](std::size_t line_no, const std::vector<std::string>& fields) {
        if (!header_seen) {
            header_seen = true;
            if (fields.empty() || fields.back() != "label")
                throw ParseError(path + ": expected a trailing 'label' column");
            m.names.assign(fields.begin(), fields.end() - 1);
            return;
        }
        if (fields.size() != m.names.size() + 1)
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad field count");
        std::vector<double> row(m.names.size());
        for (std::size_t c = 0; c < m.names.size(); ++c) row[c] = parse_double(fields[c]);
        rows.push_back(std::move(row));
        m.y.push_back(static_cast<int>(parse_int(fields.back(), "label")));
    });
    m.x = rows.empty() ? Matrix(0, m.names.size()) : Matrix::from_rows(rows);
    return m;
}

// ---------------------------------------------------------------------------
// pipeline

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg, std::ostream* log = nullptr)
        : cfg_(std::move(cfg)), out_(cfg_.output_dir), log_(log) {
        cfg_.validate();
        std::filesystem::create_directories(out_ / "models");
    }

    const PipelineConfig& config() const { return cfg_; }
    std::filesystem::path path(const char* name) const { return out_ / name; }

    // ---- stages ------------------------------------------------------

    void ingest() {
        run_stage("ingest", [&] {
            IngestRoles roles = cfg_.roles;
            FeatureSchema schema =
                infer_schema_file(cfg_.input, roles, cfg_.force_categorical,
                                  cfg_.missing_marker);
            EncounterData data = parse_csv_file(cfg_.input, std::move(schema), roles);
            std::size_t parsed = data.rows.size();
            CohortFilter filter;
            filter.excluded_dispositions = cfg_.excluded_dispositions;
            FilterOutcome fo = filter_cohort(data, filter);
            drop_sparse_columns(data, cfg_.max_missing_fraction, cfg_.drop_columns);
            drop_high_cardinality_columns(data, cfg_.max_levels);
            CohortTable cohort = encode_features(data, cfg_.label_policy);
            std::size_t positives = 0;
            for (int v : cohort.labels) positives += v;
            cohort.provenance.push_back(
                "cohort: " + std::to_string(cohort.x.rows()) + " rows, " +
                std::to_string(positives) + " positive labels");
            cohort.save(path(artifact::kCohortCsv).string(),
                        path(artifact::kCohortMeta).string());
            log("ingest: parsed " + std::to_string(parsed) + " encounters, cohort " +
                std::to_string(cohort.x.rows()) + " rows (" +
                std::to_string(fo.dropped_repeat_encounters) + " repeats, " +
                std::to_string(fo.dropped_dispositions) + " death/hospice dropped), " +
                std::to_string(positives) + " positives");
        });
    }

    void preprocess() {
        run_stage("preprocess", [&] {
            CohortTable cohort = load_cohort();
            auto numeric = cohort.numeric_mask();
            std::vector<std::string> names;
            for (const auto& c : cohort.columns) names.push_back(c.name);

            if (!cfg_.paper_order) {
                SplitIndices split = partition(cohort.x.rows(), cfg_.split_ratio,
                                               cfg_.split_seed);
                if (cfg_.poison_test_rows) poison_rows(cohort, split.test);
                save_split(split);
                PreprocessParams params =
                    fit_preprocess(cohort.x, split.train, numeric, cfg_.outlier_cutoff,
                                   cfg_.outliers_enabled);
                params.save(path(artifact::kParams).string());
                std::size_t outside = 0;
                Matrix full = apply_preprocess(cohort.x, params, &outside);
                save_labelled_matrix(
                    path(artifact::kTrain).string(),
                    {names, full.select_rows(split.train), select(cohort.labels, split.train)});
                save_labelled_matrix(
                    path(artifact::kTest).string(),
                    {names, full.select_rows(split.test), select(cohort.labels, split.test)});
                log("preprocess: train " + std::to_string(split.train.size()) + ", test " +
                    std::to_string(split.test.size()) + ", " + std::to_string(outside) +
                    " normalized cells outside [0,1]");
            } else {
                // balance-before-split order: parameters fit on everything,
                // the balanced table is partitioned afterwards
                std::vector<std::size_t> all(cohort.x.rows());
                for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
                PreprocessParams params =
                    fit_preprocess(cohort.x, all, numeric, cfg_.outlier_cutoff,
                                   cfg_.outliers_enabled);
                params.save(path(artifact::kParams).string());
                Matrix full = apply_preprocess(cohort.x, params);
                BalanceResult bal = balance(full, cohort.labels, cfg_.strategy,
                                            cfg_.balance_seed, cfg_.rose_shrink);
                SplitIndices split = partition(bal.x.rows(), cfg_.split_ratio, cfg_.split_seed);
                save_split(split);
                save_labelled_matrix(
                    path(artifact::kTrain).string(),
                    {names, bal.x.select_rows(split.train), select(bal.y, split.train)});
                save_labelled_matrix(
                    path(artifact::kTest).string(),
                    {names, bal.x.select_rows(split.test), select(bal.y, split.test)});
                log("preprocess (paper order): balanced " + std::to_string(bal.x.rows()) +
                    " rows before splitting; train " + std::to_string(split.train.size()) +
                    ", test " + std::to_string(split.test.size()));
            }
        });
    }

    void features() {
        run_stage("features", [&] {
            LabelledMatrix train = load_labelled_matrix(path(artifact::kTrain).string());
            if (!cfg_.features_enabled || cfg_.feature_apply == "none") {
                write_lines(path(artifact::kSelected).string(), train.names);
                log("features: selection disabled, keeping all " +
                    std::to_string(train.names.size()) + " columns");
                return;
            }

            BorutaConfig bc;
            bc.max_iterations = cfg_.boruta_iterations;
            bc.significance = cfg_.boruta_significance;
            bc.forest_trees = cfg_.boruta_trees;
            bc.forest_min_node = cfg_.boruta_min_node;
            bc.seed = cfg_.features_seed;
            auto report = boruta(train.x, train.y, train.names, bc);
            save_boruta_report(report);

            auto trace = stepwise_select(train.x, train.y, train.names, cfg_.alpha_enter,
                                         cfg_.alpha_remove);
            save_stepwise_trace(trace);

            auto both = consensus(report, trace);
            write_lines(path(artifact::kConsensus).string(), both);

            std::vector<std::string> selected;
            if (cfg_.feature_apply == "consensus") selected = both;
            else if (cfg_.feature_apply == "boruta") selected = report.confirmed();
            else selected = trace.selected;
            if (selected.empty()) {
                log("features: selected set is empty, falling back to all columns");
                selected = train.names;
            }
            write_lines(path(artifact::kSelected).string(), selected);
            log("features: boruta confirmed " + std::to_string(report.confirmed().size()) +
                " of " + std::to_string(train.names.size()) + " in " +
                std::to_string(report.iterations_run) + " iterations; stepwise selected " +
                std::to_string(trace.selected.size()) + "; consensus " +
                std::to_string(both.size()) + "; applying '" + cfg_.feature_apply + "' (" +
                std::to_string(selected.size()) + " columns)");
        });
    }

    void train() {
        run_stage("train", [&] {
            auto [train_m, test_m] = load_selected_train_test();
            BalanceResult bal = balanced_train(train_m);

            std::ostringstream table;
            table << "family,accuracy,sensitivity,specificity,precision,recall,f1\n";
            for (std::size_t i = 0; i < cfg_.families.size(); ++i) {
                ModelFamily fam = cfg_.families[i];
                Hyperparameters hp = config_hyperparameters(fam);
                TrainedModel model = TrainedModel::train(bal.x, bal.y, hp,
                                                         derive_seed(cfg_.train_seed, i));
                model.save(model_path(fam, false));
                auto pred = classify(model.predict(test_m.x), model.threshold());
                MetricsReport r = metrics(confusion(pred, test_m.y));
                table << model.name() << ',' << metric_to_string(r.accuracy) << ','
                      << metric_to_string(r.sensitivity) << ','
                      << metric_to_string(r.specificity) << ','
                      << metric_to_string(r.precision) << ',' << metric_to_string(r.recall)
                      << ',' << metric_to_string(r.f1) << '\n';
                log("train: " + model.name() + " test accuracy " +
                    metric_to_string(r.accuracy));
            }
            write_file(path(artifact::kModelMetrics).string(), table.str());
        });
    }

    void evaluate() {
        run_stage("evaluate", [&] {
            auto [train_m, test_m] = load_selected_train_test();

            KvFile summary;
            summary.set("format", "readmit-metrics/1");
            for (ModelFamily fam : cfg_.families) {
                std::string p = model_path(fam, false);
                if (!std::filesystem::exists(p)) continue;
                TrainedModel model = TrainedModel::load(p);
                auto pred = classify(model.predict(test_m.x), model.threshold());
                MetricsReport r = metrics(confusion(pred, test_m.y));
                std::string key = "test." + model.name();
                summary.set(key + ".accuracy", metric_to_string(r.accuracy));
                summary.set(key + ".sensitivity", metric_to_string(r.sensitivity));
                summary.set(key + ".specificity", metric_to_string(r.specificity));
                summary.set(key + ".precision", metric_to_string(r.precision));
                summary.set(key + ".f1", metric_to_string(r.f1));
            }
            summary.save(path(artifact::kMetricsSummary).string());

            if (cfg_.compare_sampling_enabled) {
                std::vector<SamplingStrategy> strategies{SamplingStrategy::Oversample,
                                                         SamplingStrategy::Undersample,
                                                         SamplingStrategy::Rose};
                auto rows = compare_sampling(strategies,
                                             config_hyperparameters(cfg_.sampling_family),
                                             train_m.x, train_m.y, test_m.x, test_m.y,
                                             derive_seed(cfg_.balance_seed, 17),
                                             cfg_.rose_shrink);
                std::ostringstream comparison;
                comparison << "strategy,metric,value\n";
                for (const auto& r : rows) {
                    comparison << r.strategy << ',' << r.metric << ','
                         << (r.value ? format_double(*r.value, 6) : "NA") << '\n';
                    if (!r.error.empty()) log("evaluate: " + r.strategy + " failed: " + r.error);
                }
                write_file(path(artifact::kSamplingComparison).string(), comparison.str());
            }

            CohortTable cohort = load_cohort();
            std::ostringstream grids;
            grids << "feature_a,feature_b,bin_a,bin_b,count,mean_label\n";
            for (const auto& [a, b] : cfg_.interactions) {
                std::size_t ca, cb;
                try {
                    ca = cohort.column_index(a);
                    cb = cohort.column_index(b);
                } catch (const SchemaError&) {
                    log("evaluate: interaction pair " + a + ":" + b +
                        " skipped (column not in cohort)");
                    continue;
                }
                auto grid = interaction_means(cohort.x, cohort.labels, ca, cb, a, b);
                for (std::size_t i = 0; i < grid.bins_a.size(); ++i)
                    for (std::size_t j = 0; j < grid.bins_b.size(); ++j)
                        grids << a << ',' << b << ',' << grid.bins_a[i] << ','
                             << grid.bins_b[j] << ',' << grid.count[i][j] << ','
                             << (grid.mean[i][j] ? format_double(*grid.mean[i][j], 6) : "NA")
                             << '\n';
            }
            write_file(path(artifact::kInteractions).string(), grids.str());
            log("evaluate: wrote metrics summary, sampling comparison and interaction grids");
        });
    }

    void tune() {
        run_stage("tune", [&] {
            if (!cfg_.tune_enabled || cfg_.tune_families.empty()) {
                log("tune: disabled");
                return;
            }
            auto [train_m, test_m] = load_selected_train_test();
            TuneSplit ts = tune_split(train_m);

            KvFile tuned;
            tuned.set("format", "readmit-tuned/1");
            std::ostringstream table;
            table << "family,optimized_accuracy,gene1,gene2,param1,value1,param2,value2\n";

            for (std::size_t i = 0; i < cfg_.tune_families.size(); ++i) {
                ModelFamily fam = cfg_.tune_families[i];
                const GeneDecoder& dec = decoder_for(fam);
                GaConfig ga_cfg = cfg_.ga;
                ga_cfg.seed = derive_seed(cfg_.ga.seed, i);
                std::uint64_t fit_seed = derive_seed(cfg_.train_seed, 100 + i);

                auto fitness = [&](const Chromosome& genes) {
                    Hyperparameters hp = decode_hyperparameters(fam, dec, genes);
                    TrainedModel m = TrainedModel::train(ts.fit.x, ts.fit.y, hp, fit_seed);
                    auto pred = classify(m.predict(ts.validation.x), m.threshold());
                    return accuracy_metric_int(pred, ts.validation.y);
                };
                GaResult result = ga_tune(fitness, dec.genes.size(), ga_cfg);
                save_ga_trace(fam, result);

                Hyperparameters best_hp = decode_hyperparameters(fam, dec, result.best);
                BalanceResult bal = balanced_train(train_m);
                TrainedModel model = TrainedModel::train(bal.x, bal.y, best_hp, fit_seed);
                model.save(model_path(fam, true));
                auto pred = classify(model.predict(test_m.x), model.threshold());
                MetricsReport r = metrics(confusion(pred, test_m.y));

                auto decoded = dec.decode(result.best);
                table << family_name(fam) << ',' << metric_to_string(r.accuracy) << ','
                      << format_double(result.best[0], 6) << ','
                      << format_double(result.best[1], 6) << ',' << dec.genes[0].name << ','
                      << format_double(decoded[0], 6) << ',' << dec.genes[1].name << ','
                      << format_double(decoded[1], 6) << '\n';
                for (std::size_t g = 0; g < dec.genes.size(); ++g) {
                    tuned.set(family_name(fam) + "." + dec.genes[g].name,
                              to_hexfloat(decoded[g]));
                    tuned.set(family_name(fam) + ".gene." + std::to_string(g),
                              to_hexfloat(result.best[g]));
                }
                log("tune: " + family_name(fam) + " validation best " +
                    format_double(result.best_fitness, 4) + ", test accuracy " +
                    metric_to_string(r.accuracy) + " (" +
                    std::to_string(result.evaluations) + " evaluations)");
            }
            write_file(path(artifact::kTunedMetrics).string(), table.str());
            tuned.save(path(artifact::kTunedParams).string());
        });
    }

    void ensemble() {
        run_stage("ensemble", [&] {
            if (!cfg_.ensemble_enabled) {
                log("ensemble: disabled");
                return;
            }
            auto [train_m, test_m] = load_selected_train_test();
            TuneSplit ts = tune_split(train_m);

            // candidate pool: default-parameter models plus tuned parameter
            // sets when the tune stage ran; everything is fit on the tuning
            // subsplit so the selection split stays disjoint from training
            struct Candidate {
                std::string label;
                Hyperparameters hp;
            };
            std::vector<Candidate> pool;
            for (ModelFamily fam : cfg_.families)
                pool.push_back({family_name(fam), config_hyperparameters(fam)});
            std::string tuned_path = path(artifact::kTunedParams).string();
            if (std::filesystem::exists(tuned_path)) {
                KvFile tuned = KvFile::load(tuned_path);
                for (ModelFamily fam : cfg_.tune_families) {
                    const GeneDecoder& dec = decoder_for(fam);
                    Chromosome genes;
                    bool ok = true;
                    for (std::size_t g = 0; g < dec.genes.size(); ++g) {
                        const std::string* v =
                            tuned.find(family_name(fam) + ".gene." + std::to_string(g));
                        if (!v) {
                            ok = false;
                            break;
                        }
                        genes.push_back(parse_double(*v));
                    }
                    if (ok)
                        pool.push_back({family_name(fam) + "_tuned",
                                        decode_hyperparameters(fam, dec, genes)});
                }
            }

            std::vector<std::vector<double>> val_scores, test_scores;
            std::vector<std::string> labels;
            for (std::size_t i = 0; i < pool.size(); ++i) {
                TrainedModel m = TrainedModel::train(ts.fit.x, ts.fit.y, pool[i].hp,
                                                     derive_seed(cfg_.train_seed, 200 + i));
                val_scores.push_back(m.predict(ts.validation.x));
                test_scores.push_back(m.predict(test_m.x));
                labels.push_back(pool[i].label);
            }

            ScoreMetric metric = cfg_.ensemble_metric == "f1" ? ScoreMetric(f1_metric)
                                                              : ScoreMetric(accuracy_metric);
            EnsembleSelection sel = greedy_ensemble(val_scores, ts.validation.y, metric,
                                                    cfg_.ensemble_max_rounds);

            auto test_mean = ensemble_scores(test_scores, sel.members);
            MetricsReport r = metrics(confusion(classify(test_mean), test_m.y));

            KvFile out;
            out.set("format", "readmit-ensemble/1");
            out.set("metric", cfg_.ensemble_metric);
            out.set("selection_value", format_double(sel.metric, 6));
            {
                std::vector<std::string> names;
                for (std::size_t m : sel.members) names.push_back(labels[m]);
                out.set("members", join(names, ","));
            }
            out.set("test.accuracy", metric_to_string(r.accuracy));
            out.set("test.sensitivity", metric_to_string(r.sensitivity));
            out.set("test.specificity", metric_to_string(r.specificity));
            out.save(path(artifact::kEnsemble).string());
            log("ensemble: " + std::to_string(sel.members.size()) + " members, selection " +
                cfg_.ensemble_metric + " " + format_double(sel.metric, 4) +
                ", test accuracy " + metric_to_string(r.accuracy));
        });
    }

    void run_all() {
        ingest();
        preprocess();
        features();
        train();
        evaluate();
        tune();
        ensemble();
    }

    // ---- report ------------------------------------------------------

    std::string report(bool csv_format = false) const {
        std::ostringstream out;
        std::vector<std::string> missing;
        auto have = [&](const char* name) {
            if (std::filesystem::exists(path(name))) return true;
            missing.push_back(name);
            return false;
        };

        if (csv_format) {
            for (const char* name : {artifact::kModelMetrics, artifact::kTunedMetrics}) {
                if (!have(name)) continue;
                std::string section = name == artifact::kModelMetrics ? "models" : "tuned";
                std::istringstream in(read_file(path(name).string()));
                std::string line;
                std::getline(in, line);  // header
                while (std::getline(in, line))
                    if (!line.empty()) out << section << ',' << line << '\n';
            }
            if (have(artifact::kEnsemble)) {
                KvFile e = KvFile::load(path(artifact::kEnsemble).string());
                out << "ensemble,members," << e.get_or("members", "") << '\n';
                out << "ensemble,selection_" << e.get_or("metric", "?") << ','
                    << e.get_or("selection_value", "NA") << '\n';
                out << "ensemble,test_accuracy," << e.get_or("test.accuracy", "NA") << '\n';
            }
            if (!missing.empty()) out << "missing," << join(missing, ";") << '\n';
            return out.str();
        }

        out << "readmit results in " << out_.string() << "\n";
        if (have(artifact::kCohortMeta)) {
            KvFile meta = KvFile::load(path(artifact::kCohortMeta).string());
            out << "  cohort: " << meta.get_or("rows", "?") << " rows, "
                << meta.get_or("columns", "?") << " encoded columns\n";
        }
        if (have(artifact::kConsensus)) {
            out << "  consensus features: ";
            std::istringstream in(read_file(path(artifact::kConsensus).string()));
            std::string line, acc;
            while (std::getline(in, line))
                if (!line.empty()) acc += (acc.empty() ? "" : ", ") + line;
            out << (acc.empty() ? "(none)" : acc) << "\n";
        }
        if (have(artifact::kModelMetrics)) {
            out << "  model performance (test split):\n";
            std::istringstream in(read_file(path(artifact::kModelMetrics).string()));
            std::string line;
            std::getline(in, line);
            out << "    family    accuracy  sensitivity  specificity\n";
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto f = split(line, ',');
                char buf[128];
                std::snprintf(buf, sizeof(buf), "    %-9s %-9s %-12s %s\n", f[0].c_str(),
                              f[1].c_str(), f[2].c_str(), f[3].c_str());
                out << buf;
            }
        }
        if (have(artifact::kTunedMetrics)) {
            out << "  tuned models (test split):\n";
            std::istringstream in(read_file(path(artifact::kTunedMetrics).string()));
            std::string line;
            std::getline(in, line);
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                auto f = split(line, ',');
                out << "    " << f[0] << ": accuracy " << f[1] << ", genes (" << f[2] << ", "
                    << f[3] << "), " << f[4] << " = " << f[5] << ", " << f[6] << " = " << f[7]
                    << "\n";
            }
        } else {
            out << "  tuning not run\n";
        }
        if (have(artifact::kEnsemble)) {
            KvFile e = KvFile::load(path(artifact::kEnsemble).string());
            out << "  ensemble: [" << e.get_or("members", "") << "], selection "
                << e.get_or("metric", "?") << " " << e.get_or("selection_value", "NA")
                << ", test accuracy " << e.get_or("test.accuracy", "NA") << "\n";
        }
        out << "  plot data:";
        for (const char* name : {artifact::kSamplingComparison, artifact::kInteractions, artifact::kBoruta,
                                 artifact::kStepwise}) {
            if (std::filesystem::exists(path(name))) out << " " << name;
        }
        out << "\n";
        if (!missing.empty()) out << "  missing artifacts: " << join(missing, ", ") << "\n";
        return out.str();
    }

    // ---- manifest ----------------------------------------------------

    void write_manifest() {
        KvFile m;
        m.set("format", "readmit-manifest/1");
        m.set("version", READMIT_VERSION);
        m.set("pipeline.order", cfg_.paper_order ? "paper" : "sound");
        const KvFile snapshot = cfg_.to_kv();
        for (const auto& [k, v] : snapshot.items()) {
            // the bundle's own location is not part of its identity
            if (k == "output.dir") continue;
            m.set("config." + k, v);
        }
        std::vector<std::string> files;
        for (const auto& entry : std::filesystem::recursive_directory_iterator(out_)) {
            if (!entry.is_regular_file()) continue;
            std::string rel = std::filesystem::relative(entry.path(), out_).string();
            if (rel == artifact::kManifest || rel == artifact::kTimings) continue;
            files.push_back(rel);
        }
        std::sort(files.begin(), files.end());
        for (const auto& rel : files)
            m.set("artifact." + rel, file_checksum((out_ / rel).string()));
        m.save(path(artifact::kManifest).string());
    }

private:
    struct TuneSplit {
        LabelledMatrix fit;         // balanced tuning subsplit
        LabelledMatrix validation;  // untouched holdout carved from train
    };

    template <typename Fn>
    void run_stage(const std::string& name, Fn&& fn) {
        auto started = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (...) {
            write_manifest();
            throw;
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                       started)
                             .count();
        std::ofstream t(path(artifact::kTimings), std::ios::app);
        t << name << " = " << format_double(seconds, 4) << "\n";
        write_manifest();
    }

    void log(const std::string& msg) {
        if (log_) (*log_) << msg << "\n";
    }

    CohortTable load_cohort() const {
        return CohortTable::load(path(artifact::kCohortCsv).string(),
                                 path(artifact::kCohortMeta).string());
    }

    void save_split(const SplitIndices& s) const {
        KvFile kv;
        kv.set("format", "readmit-split/1");
        kv.set_int("seed", static_cast<long long>(s.seed));
        kv.set("ratio", format_double(s.ratio));
        kv.set("train", indices_to_string(s.train));
        kv.set("test", indices_to_string(s.test));
        kv.save(path(artifact::kSplit).string());
    }

    static std::string indices_to_string(std::span<const std::size_t> idx) {
        std::string out;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            if (i) out += ' ';
            out += std::to_string(idx[i]);
        }
        return out;
    }

    void poison_rows(CohortTable& cohort, std::span<const std::size_t> rows) const {
        for (std::size_t r : rows) {
            for (std::size_t c = 0; c < cohort.x.cols(); ++c)
                cohort.x(r, c) = 1e6 + static_cast<double>((r * 31 + c * 7) % 997);
            cohort.labels[r] = static_cast<int>(r % 2);
        }
    }

    std::pair<LabelledMatrix, LabelledMatrix> load_selected_train_test() const {
        LabelledMatrix train = load_labelled_matrix(path(artifact::kTrain).string());
        LabelledMatrix test = load_labelled_matrix(path(artifact::kTest).string());
        std::string selected_path = path(artifact::kSelected).string();
        if (std::filesystem::exists(selected_path)) {
            auto selected = read_lines(selected_path);
            std::vector<std::size_t> idx;
            for (const auto& name : selected) {
                for (std::size_t c = 0; c < train.names.size(); ++c)
                    if (train.names[c] == name) {
                        idx.push_back(c);
                        break;
                    }
            }
            if (!idx.empty()) {
                train.x = train.x.select_cols(idx);
                test.x = test.x.select_cols(idx);
                std::vector<std::string> names;
                for (std::size_t c : idx) names.push_back(train.names[c]);
                train.names = names;
                test.names = std::move(names);
            }
        }
        return {std::move(train), std::move(test)};
    }

    BalanceResult balanced_train(const LabelledMatrix& train) const {
        if (cfg_.paper_order) return {train.x, train.y};  // balanced upstream
        return balance(train.x, train.y, cfg_.strategy, cfg_.balance_seed, cfg_.rose_shrink);
    }

    TuneSplit tune_split(const LabelledMatrix& train) const {
        SplitIndices s = partition(train.x.rows(), 1.0 - cfg_.validation_fraction,
                                   cfg_.validation_seed);
        LabelledMatrix fit_part{train.names, train.x.select_rows(s.train),
                                select(train.y, s.train)};
        TuneSplit out;
        out.validation = {train.names, train.x.select_rows(s.test), select(train.y, s.test)};
        if (cfg_.paper_order) {
            out.fit = std::move(fit_part);
        } else {
            BalanceResult bal = balance(fit_part.x, fit_part.y, cfg_.strategy,
                                        derive_seed(cfg_.balance_seed, 1), cfg_.rose_shrink);
            out.fit = {train.names, std::move(bal.x), std::move(bal.y)};
        }
        return out;
    }

    Hyperparameters config_hyperparameters(ModelFamily fam) const {
        Hyperparameters hp;
        hp.family = fam;
        switch (fam) {
            case ModelFamily::Cart: hp.values = cfg_.cart; break;
            case ModelFamily::Forest: hp.values = cfg_.forest; break;
            case ModelFamily::Gbm: hp.values = cfg_.gbm; break;
            case ModelFamily::Glm: hp.values = cfg_.glm; break;
            case ModelFamily::Svm: hp.values = cfg_.svm; break;
        }
        return hp;
    }

    const GeneDecoder& decoder_for(ModelFamily fam) const {
        auto it = cfg_.decoders.find(family_name(fam));
        if (it == cfg_.decoders.end())
            throw ConfigError("no gene decoder configured for " + family_name(fam));
        return it->second;
    }

    Hyperparameters decode_hyperparameters(ModelFamily fam, const GeneDecoder& dec,
                                           const Chromosome& genes) const {
        auto values = dec.decode(genes);
        Hyperparameters hp = config_hyperparameters(fam);
        for (std::size_t g = 0; g < dec.genes.size(); ++g) {
            const std::string& name = dec.genes[g].name;
            double v = values[g];
            bool known = true;
            switch (fam) {
                case ModelFamily::Cart: {
                    auto& p = std::get<CartHp>(hp.values);
                    if (name == "complexity") p.complexity = v;
                    else if (name == "min_node_size") p.min_node_size = static_cast<std::size_t>(v);
                    else known = false;
                    break;
                }
                case ModelFamily::Forest: {
                    auto& p = std::get<ForestHp>(hp.values);
                    if (name == "trees") p.trees = static_cast<std::size_t>(v);
                    else if (name == "features_per_split")
                        p.features_per_split = static_cast<std::size_t>(v);
                    else known = false;
                    break;
                }
                case ModelFamily::Gbm: {
                    auto& p = std::get<GbmHp>(hp.values);
                    if (name == "learning_rate") p.learning_rate = v;
                    else if (name == "max_depth") p.max_depth = static_cast<std::size_t>(v);
                    else if (name == "stages") p.stages = static_cast<std::size_t>(v);
                    else known = false;
                    break;
                }
                case ModelFamily::Glm: {
                    auto& p = std::get<GlmHp>(hp.values);
                    if (name == "l2") p.l2 = v;
                    else if (name == "threshold") p.threshold = v;
                    else known = false;
                    break;
                }
                case ModelFamily::Svm: {
                    auto& p = std::get<SvmHp>(hp.values);
                    if (name == "c") p.c = v;
                    else if (name == "gamma") p.gamma = v;
                    else if (name == "degree") p.degree = static_cast<int>(v);
                    else known = false;
                    break;
                }
            }
            if (!known)
                throw ConfigError("decoder gene '" + name + "' does not map to a " +
                                  family_name(fam) + " hyperparameter");
        }
        return hp;
    }

    static double accuracy_metric_int(std::span<const int> pred, std::span<const int> truth) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
        return static_cast<double>(hit) / static_cast<double>(pred.size());
    }

    std::string model_path(ModelFamily fam, bool tuned) const {
        return (out_ / "models" / (family_name(fam) + (tuned ? "_tuned" : "") + ".model"))
            .string();
    }

    void save_boruta_report(const FeatureImportanceReport& report) const {
        std::ostringstream out;
        out << "feature,mean_importance,sd_importance,z_score,hits,iterations,decision\n";
        for (const auto& f : report.features) {
            out << f.name << ',' << format_double(f.mean_importance, 6) << ','
                << format_double(f.sd_importance, 6) << ','
                << (std::isnan(f.z) ? "NA" : format_double(f.z, 6)) << ',' << f.hits << ','
                << f.iterations << ',' << boruta_decision_name(f.decision) << '\n';
        }
        write_file(path(artifact::kBoruta).string(), out.str());

        std::ostringstream shadow;
        shadow << "iteration,shadow_max\n";
        for (std::size_t i = 0; i < report.shadow_max_history.size(); ++i)
            shadow << (i + 1) << ',' << format_double(report.shadow_max_history[i], 6) << '\n';
        write_file(path(artifact::kBorutaShadow).string(), shadow.str());
    }

    void save_stepwise_trace(const StepwiseTrace& trace) const {
        std::ostringstream out;
        out << "step,action,feature,p_value\n";
        for (const auto& s : trace.steps)
            out << s.step << ',' << (s.action == StepAction::Add ? "add" : "remove") << ','
                << s.feature << ',' << format_double(s.p_value, 6) << '\n';
        write_file(path(artifact::kStepwise).string(), out.str());
    }

    void save_ga_trace(ModelFamily fam, const GaResult& result) const {
        std::ostringstream out;
        out << "generation,best_fitness,mean_fitness";
        for (std::size_t g = 0; g < result.best.size(); ++g) out << ",gene" << (g + 1);
        out << '\n';
        for (const auto& tp : result.trace) {
            out << tp.generation << ',' << format_double(tp.best, 6) << ','
                << format_double(tp.mean, 6);
            for (double g : tp.best_genes) out << ',' << format_double(g, 6);
            out << '\n';
        }
        write_file((out_ / ("ga_trace_" + family_name(fam) + ".csv")).string(), out.str());
    }

    static void write_lines(const std::string& p, std::span<const std::string> lines) {
        std::string out;
        for (const auto& l : lines) {
            out += l;
            out += '\n';
        }
        write_file(p, out);
    }

    static std::vector<std::string> read_lines(const std::string& p) {
        std::vector<std::string> out;
        std::istringstream in(read_file(p));
        std::string line;
        while (std::getline(in, line)) {
            std::string t = trim(line);
            if (!t.empty()) out.push_back(std::move(t));
        }
        return out;
    }

    PipelineConfig cfg_;
    std::filesystem::path out_;
    std::ostream* log_ = nullptr;
};

}  // namespace readmit
