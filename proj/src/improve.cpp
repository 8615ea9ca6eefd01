#include "lab/improve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace lab {

namespace {

/// Strict preference order used for argmax over sampled actions: higher q
/// wins, equal q goes to the lower index.
inline bool prefers(const QTable& q, int s, int a, int b) {
    const double qa = q.at(s, a), qb = q.at(s, b);
    return qa > qb || (qa == qb && a < b);
}

} // namespace

Policy behavior_clone(const Policy& behavior_hat) {
    return behavior_hat;
}

Policy easy_bcq(const QTable& q, const Policy& prev_policy, int m) {
    if (m < 1) throw std::invalid_argument("easy_bcq: m must be >= 1");
    if (q.n_states != prev_policy.n_states || q.n_actions != prev_policy.n_actions)
        throw std::invalid_argument("easy_bcq: shapes disagree");
    if (m == 1) return prev_policy; // a single draw is the identity

    const int A = q.n_actions;
    Policy out = Policy::zeros(q.n_states, A);
    std::vector<int> order(A);
    std::vector<double> cum(A);
    for (int s = 0; s < q.n_states; ++s) {
        // ascending preference, so the max order statistic telescopes:
        // P(pick a) = P(all draws <= a) - P(all draws < a)
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return prefers(q, s, b, a); });

        double running = 0.0;
        for (int rank = 0; rank < A; ++rank) {
            running += prev_policy.at(s, order[rank]);
            cum[rank] = running;
        }
        const double total = cum[A - 1]; // dividing by it pins the top at exactly 1
        double pow_prev = 0.0;
        for (int rank = 0; rank < A; ++rank) {
            const double pw = std::pow(cum[rank] / total, m);
            out.at(s, order[rank]) = pw - pow_prev;
            pow_prev = pw;
        }
    }
    out.validate("easy_bcq output");
    return out;
}

Policy easy_bcq_sampled(const QTable& q, const Policy& prev_policy, int m, long n_draws, Rng& rng) {
    if (m < 1) throw std::invalid_argument("easy_bcq_sampled: m must be >= 1");
    if (n_draws < 1) throw std::invalid_argument("easy_bcq_sampled: draws must be >= 1");
    Policy out = Policy::zeros(q.n_states, q.n_actions);
    for (int s = 0; s < q.n_states; ++s) {
        auto row = prev_policy.row(s);
        for (long d = 0; d < n_draws; ++d) {
            int best = rng.categorical(row);
            for (int j = 1; j < m; ++j) {
                const int a = rng.categorical(row);
                if (prefers(q, s, a, best)) best = a;
            }
            out.at(s, best) += 1.0;
        }
        for (int a = 0; a < q.n_actions; ++a) out.at(s, a) /= static_cast<double>(n_draws);
    }
    return out;
}

Policy reverse_kl(const QTable& q, const Policy& behavior, double alpha) {
    if (!(alpha > 0.0)) throw std::invalid_argument("reverse_kl: alpha must be positive");
    if (q.n_states != behavior.n_states || q.n_actions != behavior.n_actions)
        throw std::invalid_argument("reverse_kl: shapes disagree");

    Policy out = Policy::zeros(q.n_states, q.n_actions);
    for (int s = 0; s < q.n_states; ++s) {
        double top = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < q.n_actions; ++a)
            if (behavior.at(s, a) > 0.0) top = std::max(top, q.at(s, a));
        double z = 0.0;
        for (int a = 0; a < q.n_actions; ++a) {
            const double b = behavior.at(s, a);
            const double w = b > 0.0 ? b * std::exp((q.at(s, a) - top) / alpha) : 0.0;
            out.at(s, a) = w;
            z += w;
        }
        if (!(z > 0.0)) throw std::invalid_argument("reverse_kl: behavior row has no support");
        for (int a = 0; a < q.n_actions; ++a) out.at(s, a) /= z;
    }
    out.validate("reverse_kl output");
    return out;
}

Policy exp_weighted(const QTable& q, const Dataset& dataset, const Policy& behavior, double tau,
                    double clip) {
    if (!(tau > 0.0)) throw std::invalid_argument("exp_weighted: tau must be positive");
    if (!(clip > 0.0)) throw std::invalid_argument("exp_weighted: clip must be positive");
    if (q.n_states != behavior.n_states || q.n_actions != behavior.n_actions)
        throw std::invalid_argument("exp_weighted: shapes disagree");

    std::vector<double> v(q.n_states, 0.0);
    for (int s = 0; s < q.n_states; ++s)
        for (int a = 0; a < q.n_actions; ++a) v[s] += behavior.at(s, a) * q.at(s, a);

    Policy out = Policy::zeros(q.n_states, q.n_actions);
    std::vector<double> mass(q.n_states, 0.0);
    for (const auto& traj : dataset.trajectories) {
        for (const Step& step : traj) {
            const double adv = q.at(step.state, step.action) - v[step.state];
            const double w = std::min(std::exp(tau * adv), clip);
            out.at(step.state, step.action) += w;
            mass[step.state] += w;
        }
    }
    for (int s = 0; s < q.n_states; ++s) {
        if (mass[s] > 0.0) {
            for (int a = 0; a < q.n_actions; ++a) out.at(s, a) /= mass[s];
        } else {
            for (int a = 0; a < q.n_actions; ++a) out.at(s, a) = 1.0 / q.n_actions;
        }
    }
    out.validate("exp_weighted output");
    return out;
}

Policy apply_improvement(const ImprovementSpec& spec, const QTable& q, const Policy& anchor,
                         const Policy& prev, const Dataset& dataset, Rng& rng) {
    switch (spec.op) {
        case ImproveOperator::BehaviorClone:
            return behavior_clone(anchor);
        case ImproveOperator::EasyBcq: {
            const Policy& source = spec.bcq_anchor == BcqAnchor::Previous ? prev : anchor;
            if (spec.bcq_monte_carlo)
                return easy_bcq_sampled(q, source, spec.m_samples, spec.bcq_mc_draws, rng);
            return easy_bcq(q, source, spec.m_samples);
        }
        case ImproveOperator::ReverseKl:
            return reverse_kl(q, anchor, spec.alpha);
        case ImproveOperator::ExpWeighted:
            return exp_weighted(q, dataset, anchor, spec.tau, spec.weight_clip);
    }
    throw std::invalid_argument("apply_improvement: unknown operator");
}

} // namespace lab
