#pragma once

#include "lab/data.hpp"
#include "lab/mdp.hpp"
#include "lab/rng.hpp"

namespace lab {

enum class ImproveOperator { BehaviorClone, EasyBcq, ReverseKl, ExpWeighted };

/// Which policy Easy BCQ draws its candidate actions from.
enum class BcqAnchor { Previous, Behavior };

/// Improvement operator selection plus its deviation hyperparameter. Only
/// the fields of the chosen operator are read.
struct ImprovementSpec {
    ImproveOperator op = ImproveOperator::ReverseKl;
    double alpha = 0.1;         // reverse KL
    int m_samples = 5;          // Easy BCQ
    double tau = 1.0;           // exponentially weighted imitation
    double weight_clip = 100.0; // exp-weighted clip, applied pre-normalization
    BcqAnchor bcq_anchor = BcqAnchor::Previous;
    bool bcq_monte_carlo = false; // sample Eq-style instead of the closed form
    int bcq_mc_draws = 1'000'000;
};

/// Returns the anchor estimate unchanged.
Policy behavior_clone(const Policy& behavior_hat);

/// Exact distribution of "draw m actions i.i.d. from prev_policy, keep the
/// one with the highest q" (q ties break to the lowest action index).
Policy easy_bcq(const QTable& q, const Policy& prev_policy, int m);

/// Monte Carlo version of the same operator, kept for fidelity checks.
Policy easy_bcq_sampled(const QTable& q, const Policy& prev_policy, int m, long n_draws, Rng& rng);

/// Per-state maximizer of E_{a~pi} q(s,a) - alpha * KL(pi || behavior):
/// pi(a|s) proportional to behavior(a|s) * exp(q(s,a) / alpha).
Policy reverse_kl(const QTable& q, const Policy& behavior, double alpha);

/// Weighted tabular imitation: dataset actions weighted by
/// min(exp(tau * (q(s,a) - V(s))), clip) with V(s) = E_{a~behavior} q(s,a);
/// uniform at states absent from the dataset.
Policy exp_weighted(const QTable& q, const Dataset& dataset, const Policy& behavior, double tau,
                    double clip);

/// Dispatch on the selected operator; `anchor` is the behavior policy the
/// operator regularizes toward, `prev` the previous iterate.
Policy apply_improvement(const ImprovementSpec& spec, const QTable& q, const Policy& anchor,
                         const Policy& prev, const Dataset& dataset, Rng& rng);

} // namespace lab
