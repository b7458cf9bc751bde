#include <CLI11.hpp>
#include <cstdint>
#include <iostream>

#include "transopt/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitCacheError = 3;
constexpr int kExitRuntimeError = 4;

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    bool timings = false;
};

transopt::ExperimentConfig resolve_config(const CommonFlags& flags) {
    transopt::ExperimentConfig cfg;
    if (!flags.config_path.empty())
        cfg = transopt::load_experiment_config(flags.config_path);
    if (!flags.out.empty()) cfg.out = flags.out;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.jobs > 0) cfg.jobs = flags.jobs;
    if (flags.timings) cfg.timings = true;
    return cfg;
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON experiment config");
    cmd->add_option("--out", flags.out, "output directory");
    cmd->add_option("--seed", flags.seed, "experiment seed")
        ->each([&flags](const std::string&) { flags.seed_set = true; });
    cmd->add_option("--jobs", flags.jobs,
                    "worker count (results are seed-deterministic for any "
                    "value; 1 is the reference mode)");
    cmd->add_flag("--timings", flags.timings,
                  "record real wall_seconds in the sweep CSV (off keeps "
                  "output files byte-deterministic)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"TransOpt: problem classification from optimization samples"};
    app.require_subcommand(1);

    CommonFlags flags;
    int dim = 3, multiplier = 50, embed = 30, heads = 1, layers = 1;
    int instances = 0;
    std::string csv_path, report_out = "report.md";

    CLI::App* gen = app.add_subcommand(
        "generate", "build and cache the design-matrix dataset");
    add_common(gen, flags);
    gen->add_option("--instances", instances,
                    "instances per class (overrides config)");

    CLI::App* train = app.add_subcommand(
        "train", "cross-validate one model configuration on the cache");
    add_common(train, flags);
    train->add_option("--dim", dim, "problem dimension");
    train->add_option("--multiplier", multiplier, "sample-size multiplier");
    train->add_option("--embed", embed, "embedding size e");
    train->add_option("--heads", heads, "attention heads h");
    train->add_option("--layers", layers, "encoder layers L");

    CLI::App* sweep = app.add_subcommand(
        "sweep", "run the full parameter grid and append to sweep.csv");
    add_common(sweep, flags);

    CLI::App* report = app.add_subcommand(
        "report", "summarize a sweep CSV as markdown");
    report->add_option("--csv", csv_path, "sweep CSV path")->required();
    report->add_option("--out", report_out, "markdown output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (gen->parsed()) {
            transopt::ExperimentConfig cfg = resolve_config(flags);
            if (instances > 0) cfg.instances_per_class = instances;
            transopt::cmd_generate(cfg);
            std::cout << "generated dataset cache in " << cfg.out << "\n";
        } else if (train->parsed()) {
            transopt::ExperimentConfig cfg = resolve_config(flags);
            transopt::CVReport result = transopt::cmd_train(
                cfg, dim, multiplier, embed, heads, layers);
            std::cout << transopt::format_cv_summary(result, dim, multiplier);
        } else if (sweep->parsed()) {
            transopt::ExperimentConfig cfg = resolve_config(flags);
            transopt::cmd_sweep(cfg);
            std::cout << "sweep results appended to " << cfg.out
                      << "/sweep.csv\n";
        } else if (report->parsed()) {
            transopt::cmd_report(csv_path, report_out);
            std::cout << "report written to " << report_out << "\n";
        }
    } catch (const transopt::ConfigError& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfigError;
    } catch (const transopt::CacheError& ex) {
        std::cerr << "cache error: " << ex.what() << "\n";
        return kExitCacheError;
    } catch (const std::invalid_argument& ex) {
        std::cerr << "config error: " << ex.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitRuntimeError;
    }
    return kExitOk;
}
