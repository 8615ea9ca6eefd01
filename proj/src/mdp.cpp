#include "lab/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lab/kernels.hpp"

namespace lab {

namespace {

constexpr long kMaxSweeps = 10'000'000;

void check_distribution_row(std::span<const double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        if (!(p >= 0.0)) throw std::invalid_argument(what + ": negative or NaN probability");
        sum += p;
    }
    if (std::fabs(sum - 1.0) > kRowSumTol)
        throw std::invalid_argument(what + ": row does not sum to 1");
}

} // namespace

Policy Policy::deterministic(const std::vector<int>& actions, int n_actions) {
    Policy p = Policy::zeros(static_cast<int>(actions.size()), n_actions);
    for (int s = 0; s < p.n_states; ++s) {
        if (actions[s] < 0 || actions[s] >= n_actions)
            throw std::invalid_argument("deterministic policy: action index out of range");
        p.at(s, actions[s]) = 1.0;
    }
    return p;
}

void Policy::validate(const std::string& what) const {
    if (n_states <= 0 || n_actions <= 0 ||
        probs.size() != static_cast<std::size_t>(n_states) * n_actions)
        throw std::invalid_argument(what + ": bad shape");
    for (int s = 0; s < n_states; ++s) check_distribution_row(row(s), what);
}

void TabularMdp::finalize() {
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("mdp: state/action counts must be positive");
    if (!(discount >= 0.0 && discount < 1.0))
        throw std::invalid_argument("mdp: discount must lie in [0, 1)");
    const std::size_t sa = static_cast<std::size_t>(n_states) * n_actions;
    if (transition.size() != sa * n_states || reward_mean.size() != sa ||
        initial_dist.size() != static_cast<std::size_t>(n_states))
        throw std::invalid_argument("mdp: table sizes disagree with counts");
    if (reward_noise_std.empty()) reward_noise_std.assign(sa, 0.0);
    if (reward_noise_std.size() != sa)
        throw std::invalid_argument("mdp: reward noise table size mismatch");

    check_distribution_row(initial_dist, "mdp initial distribution");
    next_state.assign(sa, -1);
    bool deterministic = true;
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            auto row = transition_row(s, a);
            check_distribution_row(row, "mdp transition");
            int support = -1;
            for (int t = 0; t < n_states; ++t) {
                if (row[t] == 1.0 && support == -1) support = t;
                else if (row[t] != 0.0) { support = -2; break; }
            }
            if (support >= 0) next_state[static_cast<std::size_t>(s) * n_actions + a] = support;
            else deterministic = false;
        }
    }
    if (!deterministic) next_state.clear();
}

TabularMdp build_gridworld(const GridSpec& spec, double discount) {
    if (spec.width <= 0 || spec.height <= 0)
        throw std::invalid_argument("gridworld: width and height must be positive");
    const int S = spec.n_states();
    const int A = kGridActions;

    TabularMdp mdp;
    mdp.n_states = S;
    mdp.n_actions = A;
    mdp.discount = discount;
    mdp.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
    mdp.reward_mean.assign(static_cast<std::size_t>(S) * A, 0.0);
    mdp.reward_noise_std.assign(static_cast<std::size_t>(S) * A, 0.0);
    mdp.initial_dist.assign(S, 1.0 / S);

    const int good = spec.good_state();
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const int s = spec.state_index(x, y);
            for (int a = 0; a < A; ++a) {
                int nx = x, ny = y;
                switch (static_cast<GridAction>(a)) {
                    case GridAction::Up: ny = y + 1; break;
                    case GridAction::Down: ny = y - 1; break;
                    case GridAction::Left: nx = x - 1; break;
                    case GridAction::Right: nx = x + 1; break;
                }
                // moves into walls clamp to the current cell
                if (nx < 0 || nx >= spec.width) nx = x;
                if (ny < 0 || ny >= spec.height) ny = y;
                const int t = spec.state_index(nx, ny);
                const std::size_t sa = static_cast<std::size_t>(s) * A + a;
                mdp.transition[sa * S + t] = 1.0;
                if (s == good) {
                    mdp.reward_mean[sa] = 1.0;
                } else if (spec.is_noisy(x, y)) {
                    mdp.reward_mean[sa] = -0.5;
                    mdp.reward_noise_std[sa] = 1.0;
                }
            }
        }
    }
    mdp.finalize();
    return mdp;
}

QTable exact_q(const TabularMdp& mdp, const Policy& policy, double tol, const QTable* warm,
               Exec exec) {
    if (policy.n_states != mdp.n_states || policy.n_actions != mdp.n_actions)
        throw std::invalid_argument("exact_q: policy shape disagrees with mdp");
    if (!(tol > 0.0)) throw std::invalid_argument("exact_q: tol must be positive");
    if (warm && (warm->n_states != mdp.n_states || warm->n_actions != mdp.n_actions))
        throw std::invalid_argument("exact_q: warm-start shape disagrees with mdp");

    QTable q{mdp.n_states, mdp.n_actions, warm ? warm->values : mdp.reward_mean};
    QTable next = QTable::zeros(mdp.n_states, mdp.n_actions);
    std::vector<double> v(mdp.n_states);
    const int* det = mdp.deterministic_transitions() ? mdp.next_state.data() : nullptr;
    for (long iter = 0; iter < kMaxSweeps; ++iter) {
        kernels::evaluation_sweep(exec, mdp.reward_mean.data(), mdp.transition.data(), det,
                                  mdp.discount, policy, q, next, v);
        const double diff = kernels::sup_diff(exec, next.values, q.values);
        std::swap(q.values, next.values);
        if (diff <= tol) return q;
    }
    throw std::runtime_error("exact_q: did not converge");
}

double j_value_from_q(const TabularMdp& mdp, const Policy& policy, const QTable& q) {
    double j = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
        double v = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a) v += policy.at(s, a) * q.at(s, a);
        j += mdp.initial_dist[s] * v;
    }
    return j;
}

double j_value(const TabularMdp& mdp, const Policy& policy) {
    return j_value_from_q(mdp, policy, exact_q(mdp, policy));
}

std::vector<double> discounted_visitation(const TabularMdp& mdp, const Policy& policy, double tol,
                                          Exec exec) {
    if (!(tol > 0.0)) throw std::invalid_argument("discounted_visitation: tol must be positive");
    std::vector<double> d = mdp.initial_dist;
    std::vector<double> next(mdp.n_states, 0.0);
    const int* det = mdp.deterministic_transitions() ? mdp.next_state.data() : nullptr;
    for (long iter = 0; iter < kMaxSweeps; ++iter) {
        kernels::visitation_sweep(exec, mdp.transition.data(), det, policy, mdp.discount,
                                  mdp.initial_dist, d, next);
        const double diff = kernels::sup_diff(exec, next, d);
        std::swap(d, next);
        if (diff <= tol) break;
        if (iter + 1 == kMaxSweeps) throw std::runtime_error("discounted_visitation: did not converge");
    }
    double sum = 0.0;
    for (double x : d) sum += x;
    for (double& x : d) x /= sum;
    return d;
}

Policy optimal_policy(const TabularMdp& mdp, double tol, Exec exec) {
    if (!(tol > 0.0)) throw std::invalid_argument("optimal_policy: tol must be positive");
    std::vector<double> v(mdp.n_states, 0.0);
    std::vector<double> next(mdp.n_states, 0.0);
    std::vector<int> greedy(mdp.n_states, 0);
    const int* det = mdp.deterministic_transitions() ? mdp.next_state.data() : nullptr;
    for (long iter = 0; iter < kMaxSweeps; ++iter) {
        kernels::greedy_sweep(exec, mdp.reward_mean.data(), mdp.transition.data(), det,
                              mdp.discount, v, next, greedy.data(), mdp.n_states, mdp.n_actions);
        const double diff = kernels::sup_diff(exec, next, v);
        std::swap(v, next);
        if (diff <= tol) return Policy::deterministic(greedy, mdp.n_actions);
    }
    throw std::runtime_error("optimal_policy: did not converge");
}

Policy symmetric_optimal_policy(const TabularMdp& mdp, double tol, Exec exec) {
    const Policy greedy = optimal_policy(mdp, tol, exec);
    const QTable q = exact_q(mdp, greedy, tol, nullptr, exec);
    constexpr double tie_tol = 1e-9;
    Policy out = Policy::zeros(mdp.n_states, mdp.n_actions);
    for (int s = 0; s < mdp.n_states; ++s) {
        double best = q.at(s, 0);
        for (int a = 1; a < mdp.n_actions; ++a) best = std::max(best, q.at(s, a));
        int ties = 0;
        for (int a = 0; a < mdp.n_actions; ++a)
            if (q.at(s, a) >= best - tie_tol) ++ties;
        for (int a = 0; a < mdp.n_actions; ++a)
            if (q.at(s, a) >= best - tie_tol) out.at(s, a) = 1.0 / ties;
    }
    return out;
}

Policy down_left_policy(const GridSpec& spec, SuboptimalMode mode) {
    if (spec.width <= 0 || spec.height <= 0)
        throw std::invalid_argument("down_left_policy: invalid grid");
    Policy p = Policy::zeros(spec.n_states(), kGridActions);
    for (int s = 0; s < p.n_states; ++s) {
        switch (mode) {
            case SuboptimalMode::HalfDownHalfLeft:
                p.at(s, static_cast<int>(GridAction::Down)) = 0.5;
                p.at(s, static_cast<int>(GridAction::Left)) = 0.5;
                break;
            case SuboptimalMode::AllDown:
                p.at(s, static_cast<int>(GridAction::Down)) = 1.0;
                break;
            case SuboptimalMode::AllLeft:
                p.at(s, static_cast<int>(GridAction::Left)) = 1.0;
                break;
        }
    }
    return p;
}

Policy mix_policies(const Policy& a, const Policy& b, double w) {
    if (a.n_states != b.n_states || a.n_actions != b.n_actions)
        throw std::invalid_argument("mix_policies: shapes disagree");
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("mix_policies: w must lie in [0, 1]");
    if (w == 0.0) return b;
    if (w == 1.0) return a;
    Policy out = a;
    for (std::size_t i = 0; i < out.probs.size(); ++i)
        out.probs[i] = w * a.probs[i] + (1.0 - w) * b.probs[i];
    return out;
}

} // namespace lab
