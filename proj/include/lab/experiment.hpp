#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lab/data.hpp"
#include "lab/mdp.hpp"
#include "lab/oampi.hpp"

namespace lab {

struct EnvSpec {
    int width = 15;
    int height = 15;
    double discount = 0.9;
};

enum class BehaviorKind { OptimalMix, SuboptimalMix, Uniform };
enum class OptimalTies { Uniform, LowestIndex };

struct BehaviorSpec {
    BehaviorKind kind = BehaviorKind::OptimalMix;
    double mix_weight = 0.2; // weight on the non-uniform component
    SuboptimalMode suboptimal_policy = SuboptimalMode::HalfDownHalfLeft;
    // the optimal component spreads over tied actions by default, mirroring
    // the stochastic reading of the down-left policy
    OptimalTies optimal_ties = OptimalTies::Uniform;
};

struct DataSpec {
    int n_trajectories = 100;
    int horizon = 100;
};

struct SweepSpec {
    std::vector<double> grid;
};

struct MixtureSpec {
    std::vector<double> p_grid = {0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
    std::vector<double> alpha_grid = {0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
    int iterative_k = 500;
};

/// Declarative experiment description; everything an invocation needs lives
/// here so artifacts can be reproduced from the manifest alone.
struct ExperimentConfig {
    std::string name = "custom";
    std::vector<std::uint64_t> seeds;
    bool seeds_defaulted = false; // true when the file omitted the seed list
    EnvSpec env;
    BehaviorSpec behavior;
    DataSpec data;
    OampiConfig oampi;
    std::optional<SweepSpec> sweep;
    std::optional<MixtureSpec> mixture;
    bool emit_tables = true;
    std::string out_dir = "out";
};

TabularMdp build_env(const EnvSpec& env);
Policy build_behavior(const BehaviorSpec& spec, const TabularMdp& mdp, const GridSpec& grid);

/// Canned experiment descriptions, named after how the data-collecting
/// policy is built: "optimal_mix", "suboptimal_mix", "mixture_sweep".
ExperimentConfig preset_config(const std::string& preset_name);
std::vector<std::string> preset_names();

/// Strict parse of a config file: unknown keys, bad enum values and type
/// errors are collected into `diagnostics` (empty means valid).
std::optional<ExperimentConfig> load_config_file(const std::filesystem::path& path,
                                                 std::vector<std::string>& diagnostics);
std::string config_to_json(const ExperimentConfig& config);
std::string config_hash(const ExperimentConfig& config);

/// One fully-run seed of a single-run experiment.
struct SeedRun {
    Dataset dataset;
    RunResult result;
    QTable q_hat_final; // evaluation of the last iterate, for diagnostics
};
SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed);

struct MixtureCellResult {
    double p = 0.0;
    Variant variant = Variant::OneStep;
    double hyperparam = 0.0;
    std::uint64_t seed = 0;
    double final_j = 0.0;
};

struct MixtureVariantSummary {
    double p = 0.0;
    Variant variant = Variant::OneStep;
    double best_hyperparam = 0.0;
    std::vector<double> tuned_j_per_seed;
    double mean_j = 0.0;
    double stderr_j = 0.0;
};

struct MixtureOutcome {
    std::vector<MixtureCellResult> cells;          // every tuning cell
    std::vector<MixtureVariantSummary> summaries;  // per (p, variant)
    std::optional<double> crossover_p;             // first p where one-step >= iterative
};
MixtureOutcome run_mixture(const ExperimentConfig& config);

/// Executes the experiment and writes all artifacts under out_dir.
void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir);

std::string variant_name(Variant v);

} // namespace lab
