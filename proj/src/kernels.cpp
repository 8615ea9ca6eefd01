#include "lab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace lab::kernels {

namespace {

// Shared by the serial and parallel paths so both produce identical bits.
inline double dot_row(const double* p, const double* v, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += p[i] * v[i];
    return acc;
}

inline void q_backup_dense_state(const double* rewards, const double* transition, double gamma,
                                 const double* v, double* q_out, int s, int n_states,
                                 int n_actions) {
    const std::size_t base = static_cast<std::size_t>(s) * n_actions;
    for (int a = 0; a < n_actions; ++a) {
        const double* row = transition + (base + a) * n_states;
        q_out[base + a] = rewards[base + a] + gamma * dot_row(row, v, n_states);
    }
}

inline void q_backup_det_state(const double* rewards, const int* next_state, double gamma,
                               const double* v, double* q_out, int s, int n_actions) {
    const std::size_t base = static_cast<std::size_t>(s) * n_actions;
    for (int a = 0; a < n_actions; ++a) {
        q_out[base + a] = rewards[base + a] + gamma * v[next_state[base + a]];
    }
}

inline void greedy_state(const double* rewards, const double* transition, const int* next_state,
                         double gamma, const double* v_in, double* v_out, int* argmax_out, int s,
                         int n_states, int n_actions) {
    const std::size_t base = static_cast<std::size_t>(s) * n_actions;
    double best = 0.0;
    int best_a = 0;
    for (int a = 0; a < n_actions; ++a) {
        double q;
        if (next_state) {
            q = rewards[base + a] + gamma * v_in[next_state[base + a]];
        } else {
            q = rewards[base + a] + gamma * dot_row(transition + (base + a) * n_states, v_in, n_states);
        }
        if (a == 0 || q > best) {
            best = q;
            best_a = a;
        }
    }
    v_out[s] = best;
    if (argmax_out) argmax_out[s] = best_a;
}

inline double visitation_target(const double* transition, const int* next_state, const Policy& pi,
                                double gamma, const double* rho, const double* d_in, int t,
                                int n_states, int n_actions) {
    double flow = 0.0;
    if (next_state) {
        for (int s = 0; s < n_states; ++s) {
            const std::size_t base = static_cast<std::size_t>(s) * n_actions;
            for (int a = 0; a < n_actions; ++a) {
                if (next_state[base + a] == t) flow += d_in[s] * pi.probs[base + a];
            }
        }
    } else {
        for (int s = 0; s < n_states; ++s) {
            const std::size_t base = static_cast<std::size_t>(s) * n_actions;
            for (int a = 0; a < n_actions; ++a) {
                flow += d_in[s] * pi.probs[base + a] * transition[(base + a) * n_states + t];
            }
        }
    }
    return (1.0 - gamma) * rho[t] + gamma * flow;
}

} // namespace

void policy_values(const QTable& q, const Policy& pi, std::span<double> v_out) {
    for (int s = 0; s < q.n_states; ++s) {
        v_out[s] = dot_row(pi.row(s).data(), q.row(s).data(), q.n_actions);
    }
}

void q_backup_dense(Exec exec, const double* rewards, const double* transition, double gamma,
                    const double* v, double* q_out, int n_states, int n_actions) {
    if (exec == Exec::Serial) {
        for (int s = 0; s < n_states; ++s)
            q_backup_dense_state(rewards, transition, gamma, v, q_out, s, n_states, n_actions);
    } else {
#pragma omp parallel for schedule(static)
        for (int s = 0; s < n_states; ++s)
            q_backup_dense_state(rewards, transition, gamma, v, q_out, s, n_states, n_actions);
    }
}

void q_backup_det(Exec exec, const double* rewards, const int* next_state, double gamma,
                  const double* v, double* q_out, int n_states, int n_actions) {
    if (exec == Exec::Serial) {
        for (int s = 0; s < n_states; ++s)
            q_backup_det_state(rewards, next_state, gamma, v, q_out, s, n_actions);
    } else {
#pragma omp parallel for schedule(static)
        for (int s = 0; s < n_states; ++s)
            q_backup_det_state(rewards, next_state, gamma, v, q_out, s, n_actions);
    }
}

void evaluation_sweep(Exec exec, const double* rewards, const double* transition,
                      const int* next_state, double gamma, const Policy& pi, const QTable& q_in,
                      QTable& q_out, std::span<double> v_scratch) {
    policy_values(q_in, pi, v_scratch);
    if (next_state) {
        q_backup_det(exec, rewards, next_state, gamma, v_scratch.data(), q_out.values.data(),
                     q_in.n_states, q_in.n_actions);
    } else {
        q_backup_dense(exec, rewards, transition, gamma, v_scratch.data(), q_out.values.data(),
                       q_in.n_states, q_in.n_actions);
    }
}

void greedy_sweep(Exec exec, const double* rewards, const double* transition, const int* next_state,
                  double gamma, std::span<const double> v_in, std::span<double> v_out,
                  int* argmax_out, int n_states, int n_actions) {
    if (exec == Exec::Serial) {
        for (int s = 0; s < n_states; ++s)
            greedy_state(rewards, transition, next_state, gamma, v_in.data(), v_out.data(),
                         argmax_out, s, n_states, n_actions);
    } else {
#pragma omp parallel for schedule(static)
        for (int s = 0; s < n_states; ++s)
            greedy_state(rewards, transition, next_state, gamma, v_in.data(), v_out.data(),
                         argmax_out, s, n_states, n_actions);
    }
}

void visitation_sweep(Exec exec, const double* transition, const int* next_state, const Policy& pi,
                      double gamma, std::span<const double> rho, std::span<const double> d_in,
                      std::span<double> d_out) {
    const int n_states = pi.n_states;
    const int n_actions = pi.n_actions;
    if (exec == Exec::Serial) {
        for (int t = 0; t < n_states; ++t)
            d_out[t] = visitation_target(transition, next_state, pi, gamma, rho.data(), d_in.data(),
                                         t, n_states, n_actions);
    } else {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < n_states; ++t)
            d_out[t] = visitation_target(transition, next_state, pi, gamma, rho.data(), d_in.data(),
                                         t, n_states, n_actions);
    }
}

double sup_diff(Exec exec, std::span<const double> a, std::span<const double> b) {
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(a.size());
    double worst = 0.0;
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    } else {
#pragma omp parallel for schedule(static) reduction(max : worst)
        for (std::ptrdiff_t i = 0; i < n; ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
    }
    return worst;
}

} // namespace lab::kernels
