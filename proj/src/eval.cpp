#include "lab/eval.hpp"

#include <stdexcept>

#include "lab/kernels.hpp"

namespace lab {

namespace {

constexpr long kMaxSweeps = 10'000'000;

struct ModelView {
    const double* rewards = nullptr;
    const double* transition = nullptr;
    const int* next_state = nullptr;
};

ModelView resolve(const EmpiricalModel& model, const TabularMdp* mdp, const EvalConfig& config) {
    ModelView view;
    view.rewards = model.reward_hat.data();
    if (config.transition_source == TransitionSource::Oracle) {
        if (!mdp) throw std::invalid_argument("evaluate_offline: oracle transitions need an mdp");
        if (mdp->n_states != model.n_states || mdp->n_actions != model.n_actions)
            throw std::invalid_argument("evaluate_offline: mdp and model shapes disagree");
        view.transition = mdp->transition.data();
        if (mdp->deterministic_transitions()) view.next_state = mdp->next_state.data();
    } else {
        view.transition = model.transition_hat.data();
    }
    return view;
}

double discount_of(const TabularMdp* mdp, const EvalConfig& config) {
    const double gamma = mdp ? mdp->discount : config.discount;
    if (!(gamma >= 0.0 && gamma < 1.0))
        throw std::invalid_argument("evaluate_offline: no valid discount available");
    return gamma;
}

} // namespace

QTable evaluate_offline(const EmpiricalModel& model, const TabularMdp* mdp, const Policy& policy,
                        const EvalConfig& config, const QTable* init, Exec exec) {
    if (policy.n_states != model.n_states || policy.n_actions != model.n_actions)
        throw std::invalid_argument("evaluate_offline: policy shape disagrees with model");
    if (config.n_sweeps < 0) throw std::invalid_argument("evaluate_offline: negative sweep count");
    if (!(config.tol > 0.0)) throw std::invalid_argument("evaluate_offline: tol must be positive");

    const ModelView view = resolve(model, mdp, config);
    const double gamma = discount_of(mdp, config);

    QTable q{model.n_states, model.n_actions, {}};
    if (config.warm_start == WarmStart::PreviousQ) {
        if (!init) throw std::invalid_argument("evaluate_offline: warm start requires an init table");
        if (init->n_states != model.n_states || init->n_actions != model.n_actions)
            throw std::invalid_argument("evaluate_offline: init shape disagrees with model");
        q.values = init->values;
    } else {
        q.values = model.reward_hat; // initialize with the empirical rewards
    }

    QTable next = QTable::zeros(model.n_states, model.n_actions);
    std::vector<double> v(model.n_states);
    if (config.n_sweeps > 0) {
        for (int i = 0; i < config.n_sweeps; ++i) {
            kernels::evaluation_sweep(exec, view.rewards, view.transition, view.next_state, gamma,
                                      policy, q, next, v);
            std::swap(q.values, next.values);
        }
        return q;
    }
    for (long iter = 0; iter < kMaxSweeps; ++iter) {
        kernels::evaluation_sweep(exec, view.rewards, view.transition, view.next_state, gamma,
                                  policy, q, next, v);
        const double diff = kernels::sup_diff(exec, next.values, q.values);
        std::swap(q.values, next.values);
        if (diff <= config.tol) return q;
    }
    throw std::runtime_error("evaluate_offline: did not converge");
}

ErrorTable epsilon_beta(const TabularMdp& mdp, const Policy& policy, const QTable& q_hat) {
    if (q_hat.n_states != mdp.n_states || q_hat.n_actions != mdp.n_actions)
        throw std::invalid_argument("epsilon_beta: q shape disagrees with mdp");

    std::vector<double> v(mdp.n_states);
    kernels::policy_values(q_hat, policy, v);

    ErrorTable eps{mdp.n_states, mdp.n_actions,
                   std::vector<double>(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions, 0.0)};
    const int* det = mdp.deterministic_transitions() ? mdp.next_state.data() : nullptr;
    for (int s = 0; s < mdp.n_states; ++s) {
        for (int a = 0; a < mdp.n_actions; ++a) {
            const std::size_t k = static_cast<std::size_t>(s) * mdp.n_actions + a;
            double expect;
            if (det) {
                expect = v[det[k]];
            } else {
                expect = 0.0;
                auto row = mdp.transition_row(s, a);
                for (int t = 0; t < mdp.n_states; ++t) expect += row[t] * v[t];
            }
            eps.epsilon[k] = q_hat.values[k] - mdp.reward_mean[k] - mdp.discount * expect;
        }
    }
    return eps;
}

QTable q_tilde(const TabularMdp& mdp, const Policy& policy, const ErrorTable& eps, double tol) {
    if (eps.n_states != mdp.n_states || eps.n_actions != mdp.n_actions)
        throw std::invalid_argument("q_tilde: error table shape disagrees with mdp");
    TabularMdp aux = mdp;
    aux.reward_mean = eps.epsilon;
    aux.reward_noise_std.assign(aux.reward_mean.size(), 0.0);
    aux.finalize();
    return exact_q(aux, policy, tol);
}

double bellman_residual(const QTable& q, const Policy& policy, const EmpiricalModel* model,
                        const TabularMdp* mdp, const EvalConfig& config) {
    if (!model) throw std::invalid_argument("bellman_residual: model required");
    const ModelView view = resolve(*model, mdp, config);
    const double gamma = discount_of(mdp, config);
    QTable next = QTable::zeros(q.n_states, q.n_actions);
    std::vector<double> v(q.n_states);
    kernels::evaluation_sweep(Exec::Serial, view.rewards, view.transition, view.next_state, gamma,
                              policy, q, next, v);
    return kernels::sup_diff(Exec::Serial, next.values, q.values);
}

} // namespace lab
