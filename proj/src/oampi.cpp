#include "lab/oampi.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <omp.h>

namespace lab {

void OampiConfig::validate() const {
    if (k_iterations < 1) throw std::invalid_argument("oampi: k_iterations must be >= 1");
    if (variant == Variant::OneStep && k_iterations != 1)
        throw std::invalid_argument("oampi: one-step forces k_iterations = 1");
    if (variant == Variant::Iterative && eval.warm_start != WarmStart::PreviousQ)
        throw std::invalid_argument("oampi: iterative requires warm_start = previous_q");
    if (!(policy_mix_eta > 0.0 && policy_mix_eta <= 1.0))
        throw std::invalid_argument("oampi: policy_mix_eta must lie in (0, 1]");
}

RunResult run(const TabularMdp& mdp, const Dataset& dataset, const OampiConfig& config,
              const Policy* oracle_behavior, Exec exec) {
    config.validate();
    if (dataset.empty()) throw std::invalid_argument("oampi: dataset is empty");
    if (config.behavior_source == BehaviorSource::Oracle && !oracle_behavior)
        throw std::invalid_argument("oampi: oracle behavior source needs the behavior policy");

    const auto t0 = std::chrono::steady_clock::now();
    Rng rng = Rng(config.seed).child(0x0a11);

    RunResult result;
    result.model = fit_empirical(dataset, mdp.n_states, mdp.n_actions);
    result.anchor = config.behavior_source == BehaviorSource::Oracle ? *oracle_behavior
                                                                     : result.model.behavior_hat;
    result.initial_policy = result.anchor;

    QTable true_q = exact_q(mdp, result.initial_policy, kDefaultDpTol, nullptr, exec);
    result.initial_j = j_value_from_q(mdp, result.initial_policy, true_q);

    Policy policy = result.initial_policy;
    QTable q_hat; // estimate from the previous iteration, for warm starts
    result.iterations.reserve(config.k_iterations);
    for (int k = 1; k <= config.k_iterations; ++k) {
        const QTable* init = (config.eval.warm_start == WarmStart::PreviousQ && k > 1) ? &q_hat : nullptr;
        EvalConfig eval_cfg = config.eval;
        if (eval_cfg.warm_start == WarmStart::PreviousQ && k == 1)
            eval_cfg.warm_start = WarmStart::RewardInit; // nothing to warm-start from yet
        q_hat = evaluate_offline(result.model, &mdp, policy, eval_cfg, init, exec);

        Policy target = apply_improvement(config.improvement, q_hat, result.anchor, policy, dataset, rng);
        policy = config.policy_mix_eta == 1.0 ? std::move(target)
                                              : mix_policies(target, policy, config.policy_mix_eta);

        // exact J of the iterate; warm-started since successive iterates are close
        true_q = exact_q(mdp, policy, kDefaultDpTol, &true_q, exec);
        result.iterations.push_back(IterationRecord{policy, q_hat,
                                                    j_value_from_q(mdp, policy, true_q)});
    }

    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

void set_hyperparam(OampiConfig& config, double value) {
    switch (config.improvement.op) {
        case ImproveOperator::ReverseKl: config.improvement.alpha = value; return;
        case ImproveOperator::EasyBcq: config.improvement.m_samples = static_cast<int>(std::lround(value)); return;
        case ImproveOperator::ExpWeighted: config.improvement.tau = value; return;
        case ImproveOperator::BehaviorClone: return; // no deviation knob
    }
}

double get_hyperparam(const OampiConfig& config) {
    switch (config.improvement.op) {
        case ImproveOperator::ReverseKl: return config.improvement.alpha;
        case ImproveOperator::EasyBcq: return static_cast<double>(config.improvement.m_samples);
        case ImproveOperator::ExpWeighted: return config.improvement.tau;
        case ImproveOperator::BehaviorClone: return 0.0;
    }
    return 0.0;
}

SweepReport sweep(const TabularMdp& mdp, const Dataset& dataset, const OampiConfig& base_config,
                  std::span<const double> grid, int n_seeds, const Policy* oracle_behavior) {
    if (grid.empty()) throw std::invalid_argument("sweep: empty hyperparameter grid");
    if (n_seeds < 1) throw std::invalid_argument("sweep: n_seeds must be >= 1");

    SweepReport report;
    report.grid.assign(grid.begin(), grid.end());
    const int n_cells = static_cast<int>(grid.size()) * n_seeds;
    report.cells.assign(n_cells, SweepCell{});

    const Rng master(base_config.seed);
#pragma omp parallel for schedule(dynamic)
    for (int cell = 0; cell < n_cells; ++cell) {
        const int gi = cell / n_seeds;
        OampiConfig cfg = base_config;
        set_hyperparam(cfg, grid[gi]);
        cfg.seed = master.child(static_cast<std::uint64_t>(cell)).seed();
        const RunResult r = run(mdp, dataset, cfg, oracle_behavior, Exec::Serial);
        report.cells[cell] = SweepCell{grid[gi], cfg.seed, r.final_j()};
    }

    report.mean_j.assign(grid.size(), 0.0);
    report.stddev_j.assign(grid.size(), 0.0);
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        double mean = 0.0;
        for (int si = 0; si < n_seeds; ++si) mean += report.cells[gi * n_seeds + si].final_j;
        mean /= n_seeds;
        double var = 0.0;
        for (int si = 0; si < n_seeds; ++si) {
            const double d = report.cells[gi * n_seeds + si].final_j - mean;
            var += d * d;
        }
        report.mean_j[gi] = mean;
        report.stddev_j[gi] = n_seeds > 1 ? std::sqrt(var / (n_seeds - 1)) : 0.0;
    }
    std::size_t best = 0;
    for (std::size_t gi = 1; gi < grid.size(); ++gi)
        if (report.mean_j[gi] > report.mean_j[best]) best = gi;
    report.best_hyperparam = report.grid[best];
    return report;
}

} // namespace lab
