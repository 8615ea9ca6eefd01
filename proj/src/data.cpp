#include "lab/data.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace lab {

Dataset collect(const TabularMdp& mdp, const Policy& behavior, int n_trajectories, int horizon,
                Rng& rng) {
    if (behavior.n_states != mdp.n_states || behavior.n_actions != mdp.n_actions)
        throw std::invalid_argument("collect: behavior shape disagrees with mdp");
    if (horizon < 1) throw std::invalid_argument("collect: horizon must be >= 1");
    if (n_trajectories < 0) throw std::invalid_argument("collect: negative trajectory count");

    Dataset out;
    out.trajectories.reserve(n_trajectories);
    for (int i = 0; i < n_trajectories; ++i) {
        std::vector<Step> traj;
        traj.reserve(horizon);
        int s = rng.categorical(mdp.initial_dist);
        for (int t = 0; t < horizon; ++t) {
            const int a = rng.categorical(behavior.row(s));
            const std::size_t sa = static_cast<std::size_t>(s) * mdp.n_actions + a;
            double r = mdp.reward_mean[sa];
            if (mdp.reward_noise_std[sa] > 0.0) r += mdp.reward_noise_std[sa] * rng.normal();
            const int next = mdp.deterministic_transitions()
                                 ? mdp.next_state[sa]
                                 : rng.categorical(mdp.transition_row(s, a));
            traj.push_back(Step{s, a, r, next});
            s = next;
        }
        out.trajectories.push_back(std::move(traj));
    }
    return out;
}

Dataset mix_datasets(const Dataset& a, const Dataset& b, double p, int size, Rng& rng) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mix_datasets: p must lie in [0, 1]");
    if (size < 0) throw std::invalid_argument("mix_datasets: negative size");
    if (p > 0.0 && a.empty()) throw std::invalid_argument("mix_datasets: dataset a is empty");
    if (p < 1.0 && b.empty()) throw std::invalid_argument("mix_datasets: dataset b is empty");

    Dataset out;
    out.trajectories.reserve(size);
    for (int i = 0; i < size; ++i) {
        const bool from_a = rng.uniform() < p;
        const Dataset& src = from_a ? a : b;
        const auto idx = static_cast<std::size_t>(rng.uniform() * static_cast<double>(src.trajectories.size()));
        out.trajectories.push_back(src.trajectories[std::min(idx, src.trajectories.size() - 1)]);
    }
    return out;
}

EmpiricalModel fit_empirical(const Dataset& dataset, int n_states, int n_actions) {
    if (dataset.empty()) throw std::invalid_argument("fit_empirical: dataset is empty");
    if (n_states <= 0 || n_actions <= 0)
        throw std::invalid_argument("fit_empirical: counts must be positive");

    EmpiricalModel m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    const std::size_t sa = static_cast<std::size_t>(n_states) * n_actions;
    m.count_sa.assign(sa, 0);
    m.count_sas.assign(sa * n_states, 0);
    m.reward_sum.assign(sa, 0.0);
    m.reward_hat.assign(sa, 0.0);
    m.transition_hat.assign(sa * n_states, 0.0);

    std::vector<std::int64_t> state_visits(n_states, 0);
    for (const auto& traj : dataset.trajectories) {
        for (const Step& step : traj) {
            if (step.state < 0 || step.state >= n_states || step.action < 0 ||
                step.action >= n_actions || step.next_state < 0 || step.next_state >= n_states)
                throw std::invalid_argument("fit_empirical: step index out of range");
            const std::size_t k = static_cast<std::size_t>(step.state) * n_actions + step.action;
            m.count_sa[k] += 1;
            m.count_sas[k * n_states + step.next_state] += 1;
            m.reward_sum[k] += step.reward;
            state_visits[step.state] += 1;
        }
    }

    m.behavior_hat = Policy::zeros(n_states, n_actions);
    for (int s = 0; s < n_states; ++s) {
        for (int a = 0; a < n_actions; ++a) {
            const std::size_t k = static_cast<std::size_t>(s) * n_actions + a;
            if (m.count_sa[k] > 0) {
                m.reward_hat[k] = m.reward_sum[k] / static_cast<double>(m.count_sa[k]);
                for (int t = 0; t < n_states; ++t)
                    m.transition_hat[k * n_states + t] =
                        static_cast<double>(m.count_sas[k * n_states + t]) /
                        static_cast<double>(m.count_sa[k]);
            } else {
                m.transition_hat[k * n_states + s] = 1.0; // unvisited: absorbing self-loop
            }
            if (state_visits[s] > 0) {
                m.behavior_hat.at(s, a) =
                    static_cast<double>(m.count_sa[k]) / static_cast<double>(state_visits[s]);
            } else {
                m.behavior_hat.at(s, a) = 1.0 / n_actions;
            }
        }
    }
    m.behavior_hat.validate("behavior_hat");
    return m;
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& dataset,
                       const std::vector<std::string>& metadata) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_dataset_csv: cannot open " + path.string());
    for (const auto& line : metadata) out << "# " << line << "\n";
    out << "traj_id,t,state,action,reward,next_state\n";
    char buf[64];
    for (std::size_t i = 0; i < dataset.trajectories.size(); ++i) {
        const auto& traj = dataset.trajectories[i];
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const Step& s = traj[t];
            std::snprintf(buf, sizeof(buf), "%.17g", s.reward);
            out << i << ',' << t << ',' << s.state << ',' << s.action << ',' << buf << ','
                << s.next_state << "\n";
        }
    }
    if (!out) throw std::runtime_error("write_dataset_csv: write failed for " + path.string());
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_dataset_csv: cannot open " + path.string());
    std::string line;
    bool header_seen = false;
    Dataset out;
    long expected_traj = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            if (line != "traj_id,t,state,action,reward,next_state")
                throw std::runtime_error("read_dataset_csv: missing or wrong header row");
            header_seen = true;
            continue;
        }
        std::istringstream row(line);
        std::string fields[6];
        for (int col = 0; col < 6; ++col) {
            if (!std::getline(row, fields[col], col == 5 ? '\n' : ','))
                throw std::runtime_error("read_dataset_csv: short row: " + line);
        }
        const long traj_id = std::stol(fields[0]);
        if (traj_id != expected_traj) {
            if (traj_id != expected_traj + 1)
                throw std::runtime_error("read_dataset_csv: trajectory ids must be contiguous");
            out.trajectories.emplace_back();
            expected_traj = traj_id;
        }
        out.trajectories.back().push_back(Step{std::stoi(fields[2]), std::stoi(fields[3]),
                                               std::stod(fields[4]), std::stoi(fields[5])});
    }
    if (!header_seen) throw std::runtime_error("read_dataset_csv: missing header row");
    return out;
}

} // namespace lab
