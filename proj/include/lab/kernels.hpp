#pragma once

#include <span>

#include "lab/exec.hpp"
#include "lab/mdp.hpp"

namespace lab::kernels {

using lab::Exec;

/// v(s) = sum_a pi(a|s) * q(s,a).
void policy_values(const QTable& q, const Policy& pi, std::span<double> v_out);

/// q_out(s,a) = r(s,a) + gamma * sum_s' P(s,a,s') * v(s').
void q_backup_dense(Exec exec, const double* rewards, const double* transition, double gamma,
                    const double* v, double* q_out, int n_states, int n_actions);

/// Same backup for point-mass transitions given by a next-state table.
void q_backup_det(Exec exec, const double* rewards, const int* next_state, double gamma,
                  const double* v, double* q_out, int n_states, int n_actions);

/// One synchronous evaluation sweep against either transition model.
/// Dispatches to the deterministic kernel when `next_state` is non-null.
void evaluation_sweep(Exec exec, const double* rewards, const double* transition,
                      const int* next_state, double gamma, const Policy& pi,
                      const QTable& q_in, QTable& q_out, std::span<double> v_scratch);

/// Value-iteration sweep: v_out(s) = max_a [r + gamma * E v]; greedy action
/// (lowest index on ties) is written to argmax_out when non-null.
void greedy_sweep(Exec exec, const double* rewards, const double* transition,
                  const int* next_state, double gamma, std::span<const double> v_in,
                  std::span<double> v_out, int* argmax_out, int n_states, int n_actions);

/// Discounted-visitation sweep:
/// d_out(t) = (1-gamma) * rho(t) + gamma * sum_{s,a} d_in(s) pi(a|s) P(s,a,t).
void visitation_sweep(Exec exec, const double* transition, const int* next_state,
                      const Policy& pi, double gamma, std::span<const double> rho,
                      std::span<const double> d_in, std::span<double> d_out);

/// Elementwise sup-norm difference.
double sup_diff(Exec exec, std::span<const double> a, std::span<const double> b);

} // namespace lab::kernels
