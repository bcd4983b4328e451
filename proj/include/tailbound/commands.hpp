#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailbound/model.hpp"
#include "tailbound/potential.hpp"
#include "tailbound/walk_sim.hpp"

namespace tailbound::cli {

// Experiment configuration: one JSON file describing the model plus a block
// per command.  A command only needs its own block (cmd_bounds and the drift
// re-check in cmd_simulate also look at `certify` to know which certificate
// files to load).  Validation happens entirely at load time; every violation
// is a ConfigError naming the offending field.

struct CertifyBlock {
    std::vector<double> epsilons;
    potential::GridSpec grid;
    double tolerance = 1e-9;
    bool run_sub = true;
    bool run_super = true;
};

struct BoundsBlock {
    std::vector<double> x_grid;             // strictly increasing
    double ci_level = 0.999;                // one-sided level for upper edges
    std::optional<double> epsilon;          // default: first certify epsilon
    std::vector<double> r_grid;             // candidate levels for choose_r
};

struct SimulateBlock {
    std::uint64_t steps = 0;                // Lindley steps per replica
    std::uint64_t burn_in = 0;
    int replicas = 0;                       // >= 2
    std::uint64_t cycles = 0;
    std::optional<std::uint64_t> seed;
    std::vector<double> x_grid;             // shared by lindley.csv and mtau.csv
    std::uint64_t cycle_cap = walk_sim::kDefaultCycleCap;
    int drift_states = 15;
    std::uint64_t drift_draws = 20'000;
};

struct DiagnoseBlock {
    std::vector<double> t_grid;             // strictly increasing, positive
    double longtail_y = 1.0;
};

struct ExperimentConfig {
    nlohmann::json model_json;
    std::optional<std::string> out_dir;     // default for --out
    std::optional<CertifyBlock> certify;
    std::optional<BoundsBlock> bounds;
    std::optional<SimulateBlock> simulate;
    std::optional<DiagnoseBlock> diagnose;

    IncrementModel model() const { return IncrementModel::from_json(model_json); }

    // Parse + validate.  `seed_override` satisfies the seed requirement of a
    // simulate block that does not carry its own.
    static ExperimentConfig from_json(const nlohmann::json& j,
                                      bool have_seed_override = false);
    static ExperimentConfig load(const std::filesystem::path& path,
                                 bool have_seed_override = false);
};

struct RunOptions {
    std::filesystem::path out;
    int threads = 0;                        // 0 = all hardware threads
    std::optional<std::uint64_t> seed;      // overrides simulate.seed
};

// Pipeline commands.  Each writes its artifacts under opts.out plus a
// run_metadata.json holding only the wall-clock timestamps (so that reruns
// with the same config produce byte-identical primary outputs).  The return
// value is the process exit code: 0 success, 2 config/input error, 3
// certification failure, 4 statistical-check failure.
int cmd_certify(const ExperimentConfig& cfg, const RunOptions& opts);
int cmd_bounds(const ExperimentConfig& cfg, const RunOptions& opts);
int cmd_simulate(const ExperimentConfig& cfg, const RunOptions& opts);
int cmd_diagnose(const ExperimentConfig& cfg, const RunOptions& opts);

// `tailbound <command> --config <file.json> --out <dir> [--threads N]
// [--seed S]`.  Parses, dispatches, and maps every tailbound::Error to the
// exit-code contract above.
int run(int argc, char** argv);

// One-sided standard-normal quantile for a level in (0.5, 1), by bisection on
// the erfc form of the CDF.
double one_sided_z(double level);

}  // namespace tailbound::cli
