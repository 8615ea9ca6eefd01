#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lab/data.hpp"
#include "lab/mdp.hpp"

namespace lab {

inline constexpr int kOverestimationBins = 64;

/// Per-pair overestimation summary with a fixed-bin histogram.
struct OverestimationSummary {
    double mean = 0.0;
    double stddev = 0.0;
    double bin_lo = 0.0;
    double bin_hi = 0.0;
    std::vector<long> histogram; // kOverestimationBins counts, sum = n_samples
    long n_samples = 0;
};

/// Weighted mean squared error E_w[(q_hat - q_true)^2]; weights are a
/// distribution over (s,a).
double evaluation_mse(const QTable& q_hat, const QTable& q_true, std::span<const double> weights);

/// Weighted mean per-state reverse KL, E_w[KL(pi(.|s) || beta(.|s))].
double policy_kl(const Policy& pi, const Policy& beta, std::span<const double> state_weights);

/// Differences q_hat - q_true over the given (s,a) pairs.
OverestimationSummary overestimation(const QTable& q_hat, const QTable& q_true,
                                     std::span<const std::pair<int, int>> pairs);

/// Performance-difference identity: returns
///   lhs = J(pi) - J(beta)
///   rhs = 1/(1-gamma) * E_{s~d^pi}[Q^beta(s,pi) - Q^beta(s,beta)].
std::pair<double, double> performance_difference(const TabularMdp& mdp, const Policy& pi,
                                                 const Policy& beta, double tol = kDefaultDpTol);

/// Conservative-improvement bound: returns
///   improvement = J(pi) - J(beta)
///   lower_bound = 1/(1-gamma) * E_{s~d^beta}[(Q^beta(s,pi) - Q^beta(s,beta))
///                  - 2 gamma ||A||_inf / (1-gamma) * TV(pi(.|s), beta(.|s))].
std::pair<double, double> conservative_bound(const TabularMdp& mdp, const Policy& pi,
                                             const Policy& beta, double tol = kDefaultDpTol);

/// Half L1 distance between two probability rows.
double total_variation(std::span<const double> p, std::span<const double> q);

/// Empirical (s,a) frequency of the dataset, normalized; used as the default
/// diagnostic weighting.
std::vector<double> dataset_sa_weights(const Dataset& dataset, int n_states, int n_actions);
std::vector<double> dataset_state_weights(const Dataset& dataset, int n_states);
std::vector<std::pair<int, int>> dataset_sa_pairs(const Dataset& dataset);

} // namespace lab
