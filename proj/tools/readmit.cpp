// readmit: command-line driver for the readmission-risk pipeline.
// Subcommands map onto pipeline stages; `run` executes everything in order.
// Exit codes: 0 success, 1 stage failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "readmit/pipeline.hpp"
#include "readmit/version.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string input_override;
    std::string output_override;
    std::vector<std::string> sets;
    std::vector<std::string> models;
    long long seed = -1;
    bool paper_order = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("-c,--config", o.config_path, "pipeline config file")->required();
    cmd->add_option("-i,--input", o.input_override, "override data.input");
    cmd->add_option("-o,--output", o.output_override, "override output.dir");
    cmd->add_option("--set", o.sets, "override a config key, e.g. --set split.ratio=0.8");
    cmd->add_option("--models", o.models,
                    "restrict model families (comma list, e.g. gbm,glm)");
    cmd->add_option("--seed", o.seed, "master seed; derives every stage seed");
    cmd->add_flag("--paper-order", o.paper_order,
                  "balance the whole table before partitioning");
}

readmit::PipelineConfig build_config(const CommonOpts& o) {
    readmit::KvFile kv = readmit::KvFile::load(o.config_path, /*sections=*/true);
    for (const auto& s : o.sets) {
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw readmit::ConfigError("--set expects key=value, got: " + s);
        kv.set(readmit::trim(s.substr(0, eq)), readmit::trim(s.substr(eq + 1)));
    }
    if (!o.input_override.empty()) kv.set("data.input", o.input_override);
    if (!o.output_override.empty()) kv.set("output.dir", o.output_override);
    if (o.paper_order) kv.set("balance.paper_order", "true");
    if (!o.models.empty()) kv.set("models.families", readmit::join(o.models, ","));

    readmit::PipelineConfig cfg = readmit::PipelineConfig::from_kv(kv);
    if (!o.models.empty()) {
        // tuning is restricted to the same subset
        std::vector<readmit::ModelFamily> tuned;
        for (auto f : cfg.tune_families)
            for (auto g : cfg.families)
                if (f == g) tuned.push_back(f);
        cfg.tune_families = tuned;
    }
    if (o.seed >= 0) {
        auto base = static_cast<std::uint64_t>(o.seed);
        cfg.split_seed = base;
        cfg.balance_seed = readmit::derive_seed(base, 1);
        cfg.features_seed = readmit::derive_seed(base, 2);
        cfg.train_seed = readmit::derive_seed(base, 3);
        cfg.ga.seed = readmit::derive_seed(base, 4);
        cfg.validation_seed = readmit::derive_seed(base, 5);
    }
    return cfg;
}

int run_stages(const CommonOpts& opts, const std::vector<std::string>& stages) {
    readmit::PipelineConfig cfg;
    try {
        cfg = build_config(opts);
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    std::string current;
    try {
        readmit::Pipeline pipeline(cfg, &std::cout);
        for (const auto& stage : stages) {
            current = stage;
            if (stage == "ingest") pipeline.ingest();
            else if (stage == "preprocess") pipeline.preprocess();
            else if (stage == "features") pipeline.features();
            else if (stage == "train") pipeline.train();
            else if (stage == "evaluate") pipeline.evaluate();
            else if (stage == "tune") pipeline.tune();
            else if (stage == "ensemble") pipeline.ensemble();
        }
        return 0;
    } catch (const readmit::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        if (current.empty())
            std::cerr << "error: " << e.what() << "\n";
        else
            std::cerr << "stage " << current << " failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hospital readmission risk pipeline"};
    app.set_version_flag("--version", READMIT_VERSION);
    app.require_subcommand(1);

    std::map<std::string, CommonOpts> opts;
    const std::vector<std::string> stage_names{"ingest", "preprocess", "features", "train",
                                               "tune",   "ensemble",   "evaluate"};
    std::map<std::string, CLI::App*> cmds;
    cmds["ingest"] = app.add_subcommand("ingest", "parse, filter and encode the cohort");
    cmds["preprocess"] =
        app.add_subcommand("preprocess", "outliers, imputation, normalization, split");
    cmds["features"] = app.add_subcommand("features", "feature selection reports");
    cmds["train"] = app.add_subcommand("train", "balance and train all model families");
    cmds["tune"] = app.add_subcommand("tune", "genetic-algorithm hyperparameter tuning");
    cmds["ensemble"] = app.add_subcommand("ensemble", "greedy ensemble selection");
    cmds["evaluate"] = app.add_subcommand("evaluate", "metrics, sampling and interaction data");
    cmds["run"] = app.add_subcommand("run", "execute the full pipeline");
    cmds["report"] = app.add_subcommand("report", "summarize a results bundle");

    std::string report_format = "text";
    for (auto& [name, cmd] : cmds) add_common(cmd, opts[name]);
    cmds["report"]->add_option("--format", report_format, "text or csv")
        ->check(CLI::IsMember({"text", "csv"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    for (const auto& name : stage_names)
        if (cmds[name]->parsed()) return run_stages(opts[name], {name});

    if (cmds["run"]->parsed())
        return run_stages(opts["run"], {"ingest", "preprocess", "features", "train",
                                        "evaluate", "tune", "ensemble"});

    if (cmds["report"]->parsed()) {
        try {
            readmit::PipelineConfig cfg = build_config(opts["report"]);
            readmit::Pipeline pipeline(cfg);
            std::cout << pipeline.report(report_format == "csv");
            return 0;
        } catch (const readmit::ConfigError& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return 2;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
