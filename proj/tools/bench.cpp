#include <chrono>
#include <cstdio>
#include <vector>

#include <omp.h>

#include "lab/kernels.hpp"
#include "lab/mdp.hpp"
#include "lab/rng.hpp"

using namespace lab;

namespace {

TabularMdp random_dense_mdp(int n_states, int n_actions, Rng& rng) {
    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.discount = 0.95;
    mdp.transition.resize(static_cast<std::size_t>(n_states) * n_actions * n_states);
    mdp.reward_mean.resize(static_cast<std::size_t>(n_states) * n_actions);
    mdp.initial_dist.assign(n_states, 1.0 / n_states);
    for (std::size_t k = 0; k < mdp.reward_mean.size(); ++k) {
        mdp.reward_mean[k] = 2.0 * rng.uniform() - 1.0;
        double* row = mdp.transition.data() + k * n_states;
        double sum = 0.0;
        for (int t = 0; t < n_states; ++t) sum += row[t] = rng.uniform();
        for (int t = 0; t < n_states; ++t) row[t] /= sum;
        // normalize exactly enough for validation
        double acc = 0.0;
        for (int t = 0; t < n_states - 1; ++t) acc += row[t];
        row[n_states - 1] = 1.0 - acc;
    }
    mdp.finalize();
    return mdp;
}

double time_sweeps_dense(Exec exec, const TabularMdp& mdp, const Policy& pi, int sweeps,
                         QTable& q) {
    QTable next = QTable::zeros(mdp.n_states, mdp.n_actions);
    std::vector<double> v(mdp.n_states);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < sweeps; ++i) {
        kernels::evaluation_sweep(exec, mdp.reward_mean.data(), mdp.transition.data(), nullptr,
                                  mdp.discount, pi, q, next, v);
        std::swap(q.values, next.values);
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Point-mass transitions stored directly; a dense table at this size would
// not fit in memory.
struct DetModel {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> rewards;
    std::vector<int> next_state;
};

DetModel random_det_model(int n_states, int n_actions, Rng& rng) {
    DetModel m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.rewards.resize(static_cast<std::size_t>(n_states) * n_actions);
    m.next_state.resize(m.rewards.size());
    for (std::size_t k = 0; k < m.rewards.size(); ++k) {
        m.rewards[k] = 2.0 * rng.uniform() - 1.0;
        m.next_state[k] = static_cast<int>(rng.uniform() * n_states);
    }
    return m;
}

double time_sweeps_det(Exec exec, const DetModel& m, const Policy& pi, double gamma, int sweeps,
                       QTable& q) {
    QTable next = QTable::zeros(m.n_states, m.n_actions);
    std::vector<double> v(m.n_states);
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < sweeps; ++i) {
        kernels::evaluation_sweep(exec, m.rewards.data(), nullptr, m.next_state.data(), gamma, pi,
                                  q, next, v);
        std::swap(q.values, next.values);
    }
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

int main() {
    std::printf("threads available: %d\n", omp_get_max_threads());

    {
        Rng rng(7);
        const int S = 600, A = 6, sweeps = 100;
        const TabularMdp mdp = random_dense_mdp(S, A, rng);
        const Policy pi = Policy::uniform(S, A);

        QTable q_serial{S, A, mdp.reward_mean};
        QTable q_parallel{S, A, mdp.reward_mean};
        const double ts = time_sweeps_dense(Exec::Serial, mdp, pi, sweeps, q_serial);
        const double tp = time_sweeps_dense(Exec::Parallel, mdp, pi, sweeps, q_parallel);
        const double diff = kernels::sup_diff(Exec::Serial, q_serial.values, q_parallel.values);
        const double gflops = 2.0 * S * A * S * sweeps / 1e9;
        std::printf("dense  S=%d A=%d sweeps=%d | serial %.3fs (%.2f GFLOP/s) | omp %.3fs (%.2f "
                    "GFLOP/s) | speedup %.2fx | max|serial-omp| = %g\n",
                    S, A, sweeps, ts, gflops / ts, tp, gflops / tp, ts / tp, diff);
    }

    {
        Rng rng(11);
        const int S = 40'000, A = 4, sweeps = 500;
        const DetModel m = random_det_model(S, A, rng);
        const Policy pi = Policy::uniform(S, A);

        QTable q_serial{S, A, m.rewards};
        QTable q_parallel{S, A, m.rewards};
        const double ts = time_sweeps_det(Exec::Serial, m, pi, 0.9, sweeps, q_serial);
        const double tp = time_sweeps_det(Exec::Parallel, m, pi, 0.9, sweeps, q_parallel);
        const double diff = kernels::sup_diff(Exec::Serial, q_serial.values, q_parallel.values);
        std::printf("det    S=%d A=%d sweeps=%d | serial %.3fs | omp %.3fs | speedup %.2fx | "
                    "max|serial-omp| = %g\n",
                    S, A, sweeps, ts, tp, ts / tp, diff);
    }
    return 0;
}
