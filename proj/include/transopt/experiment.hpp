#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "transopt/sampling.hpp"
#include "transopt/training.hpp"

namespace transopt {

// Raised for a malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when the on-disk design cache is missing or corrupt.
struct CacheError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::vector<int> dims{3, 20};
    int instances_per_class = 100;  // 999 reproduces the paper's setting
    std::vector<int> multipliers{50};
    std::vector<int> grid_e{30};
    std::vector<int> grid_h{1};
    std::vector<int> grid_L{1};
    TrainConfig train;
    std::uint64_t seed = 42;
    std::string out = "out";
    int jobs = 1;
    bool timings = false;  // off keeps sweep CSV bytes seed-deterministic

    void validate() const;
};

ExperimentConfig load_experiment_config(const std::string& path);

// FNV-1a 64 of a byte buffer / file, as fixed-width lowercase hex.
std::string fnv1a_hex(const std::string& bytes);
std::string checksum_file(const std::string& path);

std::string design_filename(int dim, int multiplier, int class_id,
                            int instance_id);
std::uint64_t design_seed(std::uint64_t dataset_seed, int class_id,
                          int instance_id, int dim, int multiplier);

void write_design(const DesignMatrix& design, int instance_id, int multiplier,
                  std::uint64_t seed, const std::string& path);
DesignMatrix read_design(const std::string& path);

// Generates every design in the config and writes the manifest.
void cmd_generate(const ExperimentConfig& cfg);

// Loads the cached designs for one (dim, multiplier) slice, verifying the
// manifest checksums first.
std::vector<DesignMatrix> load_designs(const ExperimentConfig& cfg, int dim,
                                       int multiplier);

struct SweepRow {
    int dim, multiplier, e, h, L, fold;
    std::optional<double> test_accuracy;
    int epochs_run = 0;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::string error;
};

extern const char* kSweepCsvHeader;

// Merges rows into the CSV at path (rewriting it sorted by key);
// duplicate (dim, multiplier, e, h, L, fold) keys are rejected.
void append_sweep_rows(const std::string& path,
                       const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_sweep_csv(const std::string& path);

// Runs one grid point; writes a CVReport JSON, a text summary, and the
// best fold's checkpoint under cfg.out. Returns the report.
CVReport cmd_train(const ExperimentConfig& cfg, int dim, int multiplier, int e,
                   int h, int L);

void cmd_sweep(const ExperimentConfig& cfg);

// Markdown summary of a sweep CSV: per-(dim, multiplier) accuracy table
// with the best configuration flagged.
std::string render_report(const std::vector<SweepRow>& rows);
void cmd_report(const std::string& csv_path, const std::string& out_path);

std::string format_cv_summary(const CVReport& report, int dim, int multiplier);
std::string cv_report_json(const CVReport& report, int dim, int multiplier);

}  // namespace transopt
