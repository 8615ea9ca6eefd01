#include "lab/diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lab {

double evaluation_mse(const QTable& q_hat, const QTable& q_true, std::span<const double> weights) {
    if (q_hat.values.size() != q_true.values.size() || weights.size() != q_hat.values.size())
        throw std::invalid_argument("evaluation_mse: shapes disagree");
    double mse = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double d = q_hat.values[i] - q_true.values[i];
        mse += weights[i] * d * d;
    }
    return mse;
}

double policy_kl(const Policy& pi, const Policy& beta, std::span<const double> state_weights) {
    if (pi.n_states != beta.n_states || pi.n_actions != beta.n_actions ||
        state_weights.size() != static_cast<std::size_t>(pi.n_states))
        throw std::invalid_argument("policy_kl: shapes disagree");
    double kl = 0.0;
    for (int s = 0; s < pi.n_states; ++s) {
        if (state_weights[s] == 0.0) continue;
        double state_kl = 0.0;
        for (int a = 0; a < pi.n_actions; ++a) {
            const double p = pi.at(s, a);
            if (p <= 0.0) continue;
            const double b = beta.at(s, a);
            if (b <= 0.0) return std::numeric_limits<double>::infinity();
            state_kl += p * std::log(p / b);
        }
        kl += state_weights[s] * state_kl;
    }
    return kl;
}

OverestimationSummary overestimation(const QTable& q_hat, const QTable& q_true,
                                     std::span<const std::pair<int, int>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("overestimation: no pairs");
    if (q_hat.values.size() != q_true.values.size())
        throw std::invalid_argument("overestimation: shapes disagree");

    std::vector<double> diffs;
    diffs.reserve(pairs.size());
    for (const auto& [s, a] : pairs) diffs.push_back(q_hat.at(s, a) - q_true.at(s, a));

    OverestimationSummary out;
    out.n_samples = static_cast<long>(diffs.size());
    for (double d : diffs) out.mean += d;
    out.mean /= static_cast<double>(diffs.size());
    double var = 0.0;
    for (double d : diffs) var += (d - out.mean) * (d - out.mean);
    out.stddev = diffs.size() > 1 ? std::sqrt(var / static_cast<double>(diffs.size() - 1)) : 0.0;

    out.bin_lo = *std::min_element(diffs.begin(), diffs.end());
    out.bin_hi = *std::max_element(diffs.begin(), diffs.end());
    out.histogram.assign(kOverestimationBins, 0);
    const double width = (out.bin_hi - out.bin_lo) / kOverestimationBins;
    for (double d : diffs) {
        int bin = width > 0.0 ? static_cast<int>((d - out.bin_lo) / width) : 0;
        bin = std::clamp(bin, 0, kOverestimationBins - 1);
        out.histogram[bin] += 1;
    }
    return out;
}

namespace {

// E_{a~pi}[q(s,a)]
double q_of_policy(const QTable& q, const Policy& pi, int s) {
    double v = 0.0;
    for (int a = 0; a < q.n_actions; ++a) v += pi.at(s, a) * q.at(s, a);
    return v;
}

} // namespace

std::pair<double, double> performance_difference(const TabularMdp& mdp, const Policy& pi,
                                                 const Policy& beta, double tol) {
    const QTable q_beta = exact_q(mdp, beta, tol);
    const QTable q_pi = exact_q(mdp, pi, tol);
    const double lhs = j_value_from_q(mdp, pi, q_pi) - j_value_from_q(mdp, beta, q_beta);

    const std::vector<double> d_pi = discounted_visitation(mdp, pi, tol);
    double advantage = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        advantage += d_pi[s] * (q_of_policy(q_beta, pi, s) - q_of_policy(q_beta, beta, s));
    return {lhs, advantage / (1.0 - mdp.discount)};
}

std::pair<double, double> conservative_bound(const TabularMdp& mdp, const Policy& pi,
                                             const Policy& beta, double tol) {
    const QTable q_beta = exact_q(mdp, beta, tol);
    const QTable q_pi = exact_q(mdp, pi, tol);
    const double improvement = j_value_from_q(mdp, pi, q_pi) - j_value_from_q(mdp, beta, q_beta);

    double a_inf = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        a_inf = std::max(a_inf, std::fabs(q_of_policy(q_beta, pi, s) - q_of_policy(q_beta, beta, s)));

    const std::vector<double> d_beta = discounted_visitation(mdp, beta, tol);
    const double penalty_coef = 2.0 * mdp.discount * a_inf / (1.0 - mdp.discount);
    double bound = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        const double adv = q_of_policy(q_beta, pi, s) - q_of_policy(q_beta, beta, s);
        bound += d_beta[s] * (adv - penalty_coef * total_variation(pi.row(s), beta.row(s)));
    }
    return {improvement, bound / (1.0 - mdp.discount)};
}

double total_variation(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw std::invalid_argument("total_variation: sizes disagree");
    double l1 = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) l1 += std::fabs(p[i] - q[i]);
    return 0.5 * l1;
}

std::vector<double> dataset_sa_weights(const Dataset& dataset, int n_states, int n_actions) {
    std::vector<double> w(static_cast<std::size_t>(n_states) * n_actions, 0.0);
    double n = 0.0;
    for (const auto& traj : dataset.trajectories) {
        for (const Step& step : traj) {
            w[static_cast<std::size_t>(step.state) * n_actions + step.action] += 1.0;
            n += 1.0;
        }
    }
    if (n == 0.0) throw std::invalid_argument("dataset_sa_weights: empty dataset");
    for (double& x : w) x /= n;
    return w;
}

std::vector<double> dataset_state_weights(const Dataset& dataset, int n_states) {
    std::vector<double> w(n_states, 0.0);
    double n = 0.0;
    for (const auto& traj : dataset.trajectories) {
        for (const Step& step : traj) {
            w[step.state] += 1.0;
            n += 1.0;
        }
    }
    if (n == 0.0) throw std::invalid_argument("dataset_state_weights: empty dataset");
    for (double& x : w) x /= n;
    return w;
}

std::vector<std::pair<int, int>> dataset_sa_pairs(const Dataset& dataset) {
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(dataset.step_count());
    for (const auto& traj : dataset.trajectories)
        for (const Step& step : traj) pairs.emplace_back(step.state, step.action);
    return pairs;
}

} // namespace lab
