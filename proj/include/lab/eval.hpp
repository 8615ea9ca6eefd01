#pragma once

#include "lab/data.hpp"
#include "lab/exec.hpp"
#include "lab/mdp.hpp"

namespace lab {

enum class TransitionSource { Oracle, Empirical };
enum class WarmStart { PreviousQ, RewardInit };

/// Knobs for the offline evaluation procedure. n_sweeps = 0 iterates the
/// backup to sup-norm tolerance; n_sweeps > 0 applies exactly that many
/// synchronous backups.
struct EvalConfig {
    TransitionSource transition_source = TransitionSource::Oracle;
    int n_sweeps = 0;
    double tol = kDefaultDpTol;
    WarmStart warm_start = WarmStart::RewardInit;
    double discount = -1.0; // < 0: take the discount from the mdp argument
};

/// Bellman residual table epsilon(s,a) of an estimated Q against the true
/// model.
struct ErrorTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> epsilon; // [s * A + a]
};

/// Offline evaluation on the empirical model: Q <- r_hat + gamma * P * Pi * Q
/// with P either the oracle transitions (requires mdp) or transition_hat.
/// With warm_start = PreviousQ an init table must be supplied; otherwise the
/// iteration starts from the empirical rewards.
QTable evaluate_offline(const EmpiricalModel& model, const TabularMdp* mdp, const Policy& policy,
                        const EvalConfig& config, const QTable* init = nullptr,
                        Exec exec = Exec::Parallel);

/// epsilon(s,a) = q_hat(s,a) - r(s,a) - gamma * E_{s'|s,a, a'~pi}[q_hat(s',a')]
/// with the true rewards and transitions of `mdp`. A laboratory diagnostic;
/// nothing downstream of the learner may read it.
ErrorTable epsilon_beta(const TabularMdp& mdp, const Policy& policy, const QTable& q_hat);

/// Discounted accumulation of the error table under `policy`: the exact Q of
/// the auxiliary MDP whose rewards are eps and whose transitions are true.
QTable q_tilde(const TabularMdp& mdp, const Policy& policy, const ErrorTable& eps,
               double tol = kDefaultDpTol);

/// Sup-norm change of one evaluation backup under the configured model.
double bellman_residual(const QTable& q, const Policy& policy, const EmpiricalModel* model,
                        const TabularMdp* mdp, const EvalConfig& config);

} // namespace lab
