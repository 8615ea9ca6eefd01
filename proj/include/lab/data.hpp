#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lab/mdp.hpp"
#include "lab/rng.hpp"

namespace lab {

/// One transition tuple; rewards carry the sampled noise.
struct Step {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

struct Dataset {
    std::vector<std::vector<Step>> trajectories;
    std::string provenance;

    bool empty() const { return trajectories.empty(); }
    std::size_t step_count() const {
        std::size_t n = 0;
        for (const auto& t : trajectories) n += t.size();
        return n;
    }
};

/// Counts and maximum-likelihood estimates fitted from a dataset. Fallbacks
/// at unvisited entries: reward 0, self-loop transition, uniform behavior.
struct EmpiricalModel {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::int64_t> count_sa;  // [s * A + a]
    std::vector<std::int64_t> count_sas; // [s * A * S + a * S + s']
    std::vector<double> reward_sum;      // [s * A + a]
    std::vector<double> reward_hat;      // [s * A + a]
    std::vector<double> transition_hat;  // [s * A * S + a * S + s']
    Policy behavior_hat;

    std::int64_t visits(int s, int a) const {
        return count_sa[static_cast<std::size_t>(s) * n_actions + a];
    }
    double reward(int s, int a) const {
        return reward_hat[static_cast<std::size_t>(s) * n_actions + a];
    }
};

/// Rolls out `n_trajectories` of exactly `horizon` steps each under the
/// behavior policy; starts are drawn from the initial distribution.
Dataset collect(const TabularMdp& mdp, const Policy& behavior, int n_trajectories, int horizon,
                Rng& rng);

/// Builds a dataset of `size` trajectories, each drawn with replacement from
/// `a` with probability p and from `b` otherwise.
Dataset mix_datasets(const Dataset& a, const Dataset& b, double p, int size, Rng& rng);

EmpiricalModel fit_empirical(const Dataset& dataset, int n_states, int n_actions);

/// CSV with header `traj_id,t,state,action,reward,next_state`; rewards are
/// written with 17 significant digits. Lines starting with '#' are metadata.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset,
                       const std::vector<std::string>& metadata = {});
Dataset read_dataset_csv(const std::filesystem::path& path);

} // namespace lab
