#pragma once

#include <span>
#include <string>
#include <vector>

#include "lab/exec.hpp"

namespace lab {

inline constexpr double kRowSumTol = 1e-12;
inline constexpr double kDefaultDpTol = 1e-12;

/// Stochastic action table, one probability row per state.
struct Policy {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> probs; // row-major [s * n_actions + a]

    double at(int s, int a) const { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    double& at(int s, int a) { return probs[static_cast<std::size_t>(s) * n_actions + a]; }
    std::span<const double> row(int s) const {
        return {probs.data() + static_cast<std::size_t>(s) * n_actions, static_cast<std::size_t>(n_actions)};
    }
    std::span<double> row(int s) {
        return {probs.data() + static_cast<std::size_t>(s) * n_actions, static_cast<std::size_t>(n_actions)};
    }

    static Policy zeros(int n_states, int n_actions) {
        return Policy{n_states, n_actions,
                      std::vector<double>(static_cast<std::size_t>(n_states) * n_actions, 0.0)};
    }
    static Policy uniform(int n_states, int n_actions) {
        return Policy{n_states, n_actions,
                      std::vector<double>(static_cast<std::size_t>(n_states) * n_actions, 1.0 / n_actions)};
    }
    /// Point mass on `actions[s]` at every state.
    static Policy deterministic(const std::vector<int>& actions, int n_actions);

    /// Throws std::invalid_argument unless every row is a distribution.
    void validate(const std::string& what = "policy") const;
};

/// State-action value table.
struct QTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> values; // row-major [s * n_actions + a]

    double at(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    double& at(int s, int a) { return values[static_cast<std::size_t>(s) * n_actions + a]; }
    std::span<const double> row(int s) const {
        return {values.data() + static_cast<std::size_t>(s) * n_actions, static_cast<std::size_t>(n_actions)};
    }

    static QTable zeros(int n_states, int n_actions) {
        return QTable{n_states, n_actions,
                      std::vector<double>(static_cast<std::size_t>(n_states) * n_actions, 0.0)};
    }
};

/// State value table.
struct VTable {
    int n_states = 0;
    std::vector<double> values;
};

/// Ground-truth finite MDP. Mean rewards and per-(s,a) Gaussian reward noise
/// are stored separately; expectations only ever read reward_mean.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> transition;       // [s * A * S + a * S + s']
    std::vector<double> reward_mean;      // [s * A + a]
    std::vector<double> reward_noise_std; // [s * A + a], 0 means deterministic
    std::vector<double> initial_dist;     // [s]
    double discount = 0.0;
    std::vector<int> next_state;          // filled iff every transition row is a point mass

    std::span<const double> transition_row(int s, int a) const {
        return {transition.data() + (static_cast<std::size_t>(s) * n_actions + a) * n_states,
                static_cast<std::size_t>(n_states)};
    }
    double reward(int s, int a) const { return reward_mean[static_cast<std::size_t>(s) * n_actions + a]; }
    bool deterministic_transitions() const { return !next_state.empty(); }

    /// Validates all distribution rows, the initial distribution and the
    /// discount; fills next_state when transitions are point masses.
    void finalize();
};

/// Grid geometry for the noisy-corner benchmark environment: reward 1 for
/// every action taken from the top-right cell, N(-0.5, 1) rewards on the
/// left and bottom walls, deterministic clamped moves, uniform start.
struct GridSpec {
    int width = 15;
    int height = 15;

    int n_states() const { return width * height; }
    int state_index(int x, int y) const { return y * width + x; }
    int good_state() const { return state_index(width - 1, height - 1); }
    bool is_noisy(int x, int y) const {
        return (x == 0 || y == 0) && state_index(x, y) != good_state();
    }
};

enum class GridAction { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kGridActions = 4;

enum class SuboptimalMode { HalfDownHalfLeft, AllDown, AllLeft };

TabularMdp build_gridworld(const GridSpec& spec, double discount);

/// Fixed point of Q = r + gamma * P * Pi * Q, iterated synchronously until
/// the sup-norm step change is <= tol. `warm` short-circuits convergence
/// when a nearby solution is already known.
QTable exact_q(const TabularMdp& mdp, const Policy& policy, double tol = kDefaultDpTol,
               const QTable* warm = nullptr, Exec exec = Exec::Parallel);

/// Expected discounted return from the initial distribution.
double j_value(const TabularMdp& mdp, const Policy& policy);
double j_value_from_q(const TabularMdp& mdp, const Policy& policy, const QTable& q);

/// Discounted state visitation d(s) = (1-gamma) * sum_t gamma^t P(s_t = s).
std::vector<double> discounted_visitation(const TabularMdp& mdp, const Policy& policy,
                                          double tol = kDefaultDpTol, Exec exec = Exec::Parallel);

/// Greedy policy from value iteration; ties go to the lowest action index.
Policy optimal_policy(const TabularMdp& mdp, double tol = kDefaultDpTol, Exec exec = Exec::Parallel);

/// Stochastic optimal policy: probability spread uniformly over every action
/// whose optimal Q is within 1e-9 of the per-state maximum.
Policy symmetric_optimal_policy(const TabularMdp& mdp, double tol = kDefaultDpTol,
                                Exec exec = Exec::Parallel);

/// The maximally suboptimal grid policy ("down-and-left"); the default mode
/// splits probability evenly between the two actions.
Policy down_left_policy(const GridSpec& spec, SuboptimalMode mode = SuboptimalMode::HalfDownHalfLeft);

/// Rowwise mixture w * a + (1 - w) * b.
Policy mix_policies(const Policy& a, const Policy& b, double w);

} // namespace lab
