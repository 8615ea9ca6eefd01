#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lab/data.hpp"
#include "lab/eval.hpp"
#include "lab/improve.hpp"
#include "lab/mdp.hpp"

namespace lab {

enum class Variant { OneStep, MultiStep, Iterative };
enum class BehaviorSource { Oracle, Empirical };

/// Offline policy-iteration configuration covering the three schedules:
/// one-step (K = 1), multi-step (small K, each evaluation run to its
/// configured depth from scratch), and iterative (large K, one warm-started
/// sweep per iteration).
struct OampiConfig {
    Variant variant = Variant::OneStep;
    int k_iterations = 1;
    EvalConfig eval;
    ImprovementSpec improvement;
    BehaviorSource behavior_source = BehaviorSource::Oracle;
    std::uint64_t seed = 0;
    double policy_mix_eta = 1.0; // optional damping: pi <- (1-eta) prev + eta target

    void validate() const;
};

struct IterationRecord {
    Policy policy;  // pi_k
    QTable q_hat;   // the estimate pi_k was improved against (for pi_{k-1})
    double j_exact; // oracle J(pi_k)
    // diagnostics, filled by the reporting layer when requested
    double mse = 0.0;
    double kl = 0.0;
    double overestimation_mean = 0.0;
};

struct RunResult {
    EmpiricalModel model;
    Policy anchor;         // behavior policy the improvement anchors to
    Policy initial_policy; // pi_0
    double initial_j = 0.0;
    std::vector<IterationRecord> iterations; // length k_iterations
    double wall_seconds = 0.0;

    const Policy& final_policy() const {
        return iterations.empty() ? initial_policy : iterations.back().policy;
    }
    double final_j() const { return iterations.empty() ? initial_j : iterations.back().j_exact; }
};

/// Runs the configured variant on the dataset. `oracle_behavior` must be
/// supplied when behavior_source is Oracle. Deterministic given the seed.
RunResult run(const TabularMdp& mdp, const Dataset& dataset, const OampiConfig& config,
              const Policy* oracle_behavior = nullptr, Exec exec = Exec::Parallel);

struct SweepCell {
    double hyperparam = 0.0;
    std::uint64_t seed = 0;
    double final_j = 0.0;
};

struct SweepReport {
    std::vector<double> grid;
    std::vector<SweepCell> cells;     // grid-major, then seed
    std::vector<double> mean_j;       // per grid value, across seeds
    std::vector<double> stddev_j;     // per grid value, across seeds
    double best_hyperparam = 0.0;     // highest mean J, first in grid on ties
};

/// Runs every (hyperparameter, seed) cell with independent child streams and
/// picks the best value by mean exact J of the final policy. Cells execute
/// concurrently; the report is assembled in cell order.
SweepReport sweep(const TabularMdp& mdp, const Dataset& dataset, const OampiConfig& base_config,
                  std::span<const double> grid, int n_seeds,
                  const Policy* oracle_behavior = nullptr);

/// Writes the operator's deviation hyperparameter (alpha, M, or tau).
void set_hyperparam(OampiConfig& config, double value);
double get_hyperparam(const OampiConfig& config);

} // namespace lab
