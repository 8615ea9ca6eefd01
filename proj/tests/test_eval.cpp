#include <cmath>

#include <doctest.h>

#include "lab/eval.hpp"
#include "testutil.hpp"

using namespace lab;
using labtest::random_mdp;
using labtest::random_policy;

namespace {

/// Model whose estimates equal the true MDP (full coverage, no noise).
EmpiricalModel exact_model_of(const TabularMdp& mdp) {
    EmpiricalModel m;
    m.n_states = mdp.n_states;
    m.n_actions = mdp.n_actions;
    m.reward_hat = mdp.reward_mean;
    m.transition_hat = mdp.transition;
    m.behavior_hat = Policy::uniform(mdp.n_states, mdp.n_actions);
    const std::size_t sa = m.reward_hat.size();
    m.count_sa.assign(sa, 1);
    m.count_sas.assign(sa * m.n_states, 0);
    m.reward_sum = m.reward_hat;
    return m;
}

} // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("evaluation of the exact model reproduces exact_q") {
    Rng rng(1);
    const TabularMdp mdp = random_mdp(8, 3, 0.85, rng);
    const Policy pi = random_policy(8, 3, rng);
    const EmpiricalModel model = exact_model_of(mdp);

    EvalConfig cfg;
    cfg.n_sweeps = 0;
    cfg.tol = 1e-12;
    const QTable q_off = evaluate_offline(model, &mdp, pi, cfg);
    const QTable q_ref = exact_q(mdp, pi, 1e-12);
    for (std::size_t i = 0; i < q_off.values.size(); ++i)
        CHECK(q_off.values[i] == doctest::Approx(q_ref.values[i]).epsilon(1e-9));

    // empirical transitions here equal the oracle ones
    EvalConfig cfg_emp = cfg;
    cfg_emp.transition_source = TransitionSource::Empirical;
    cfg_emp.discount = mdp.discount;
    const QTable q_emp = evaluate_offline(model, nullptr, pi, cfg_emp);
    CHECK(q_emp.values == q_off.values);
}

TEST_CASE("three hand-computed sweeps on a two-state chain") {
    // states {0,1}; action 0 stays (state 0 -> 0), action 1 moves 0 -> 1;
    // both actions self-loop at state 1; gamma = 0.5
    TabularMdp mdp;
    mdp.n_states = 2;
    mdp.n_actions = 2;
    mdp.discount = 0.5;
    mdp.transition.assign(2 * 2 * 2, 0.0);
    auto set_next = [&](int s, int a, int t) { mdp.transition[(s * 2 + a) * 2 + t] = 1.0; };
    set_next(0, 0, 0);
    set_next(0, 1, 1);
    set_next(1, 0, 1);
    set_next(1, 1, 1);
    mdp.reward_mean = {0.0, 0.0, 0.0, 0.0};
    mdp.initial_dist = {1.0, 0.0};
    mdp.finalize();

    EmpiricalModel model = exact_model_of(mdp);
    model.reward_hat = {1.0, 0.0, 2.0, -1.0}; // hand-set estimate errors

    Policy pi = Policy::zeros(2, 2);
    pi.at(0, 0) = 0.5;
    pi.at(0, 1) = 0.5;
    pi.at(1, 0) = 0.25;
    pi.at(1, 1) = 0.75;

    EvalConfig cfg;
    cfg.n_sweeps = 3;
    const QTable q = evaluate_offline(model, &mdp, pi, cfg);
    // frozen from three manual synchronous backups starting at reward_hat
    CHECK(q.at(0, 0) == 1.2734375);
    CHECK(q.at(0, 1) == -0.21875);
    CHECK(q.at(1, 0) == 1.78125);
    CHECK(q.at(1, 1) == -1.21875);
}

TEST_CASE("oracle mode without an mdp is an argument error") {
    Rng rng(2);
    const TabularMdp mdp = random_mdp(3, 2, 0.9, rng);
    const EmpiricalModel model = exact_model_of(mdp);
    EvalConfig cfg;
    CHECK_THROWS_AS(evaluate_offline(model, nullptr, Policy::uniform(3, 2), cfg),
                    std::invalid_argument);
    EvalConfig warm = cfg;
    warm.warm_start = WarmStart::PreviousQ;
    CHECK_THROWS_AS(evaluate_offline(model, &mdp, Policy::uniform(3, 2), warm, nullptr),
                    std::invalid_argument);
}

TEST_CASE("epsilon of the true Q vanishes") {
    Rng rng(3);
    const TabularMdp mdp = random_mdp(6, 3, 0.8, rng);
    const Policy pi = random_policy(6, 3, rng);
    const QTable q = exact_q(mdp, pi, 1e-13);
    const ErrorTable eps = epsilon_beta(mdp, pi, q);
    for (double e : eps.epsilon) CHECK(std::fabs(e) < 1e-12);
}

TEST_CASE("with oracle transitions the converged error is the reward error") {
    Rng rng(4);
    const TabularMdp mdp = random_mdp(7, 3, 0.9, rng);
    EmpiricalModel model = exact_model_of(mdp);
    for (std::size_t k = 0; k < model.reward_hat.size(); ++k)
        model.reward_hat[k] += 0.3 * (2.0 * rng.uniform() - 1.0);

    EvalConfig cfg;
    cfg.tol = 1e-13;
    const Policy pi = random_policy(7, 3, rng);
    const QTable q_hat = evaluate_offline(model, &mdp, pi, cfg);
    const ErrorTable eps = epsilon_beta(mdp, pi, q_hat);
    for (std::size_t k = 0; k < eps.epsilon.size(); ++k)
        CHECK(eps.epsilon[k] ==
              doctest::Approx(model.reward_hat[k] - mdp.reward_mean[k]).epsilon(1e-9));
}

TEST_CASE("error accumulation basics") {
    Rng rng(5);
    const TabularMdp mdp = random_mdp(5, 2, 0.9, rng);
    const Policy pi = random_policy(5, 2, rng);

    ErrorTable zero{5, 2, std::vector<double>(10, 0.0)};
    for (double v : q_tilde(mdp, pi, zero).values) CHECK(std::fabs(v) < 1e-12);

    ErrorTable constant{5, 2, std::vector<double>(10, 0.25)};
    for (double v : q_tilde(mdp, pi, constant).values)
        CHECK(v == doctest::Approx(0.25 / 0.1).epsilon(1e-9));
}

TEST_CASE("estimate decomposes into truth plus accumulated error") {
    const TabularMdp mdp = build_gridworld(GridSpec{8, 8}, 0.9);
    Rng rng(6);
    EmpiricalModel model = exact_model_of(mdp);
    for (std::size_t k = 0; k < model.reward_hat.size(); ++k)
        model.reward_hat[k] += 0.5 * (2.0 * rng.uniform() - 1.0);

    const Policy pi = random_policy(mdp.n_states, mdp.n_actions, rng);
    EvalConfig cfg;
    cfg.tol = 1e-13;
    const QTable q_hat = evaluate_offline(model, &mdp, pi, cfg);

    const QTable q_true = exact_q(mdp, pi, 1e-13);
    const QTable q_err = q_tilde(mdp, pi, epsilon_beta(mdp, pi, q_hat), 1e-13);
    for (std::size_t k = 0; k < q_hat.values.size(); ++k)
        CHECK(std::fabs(q_hat.values[k] - q_true.values[k] - q_err.values[k]) < 1e-8);
}

TEST_CASE("the same decomposition holds for a truncated evaluation") {
    // epsilon absorbs the non-convergence, so the identity is algebraic
    const TabularMdp mdp = build_gridworld(GridSpec{6, 6}, 0.9);
    Rng rng(7);
    EmpiricalModel model = exact_model_of(mdp);
    for (std::size_t k = 0; k < model.reward_hat.size(); ++k)
        model.reward_hat[k] += 0.5 * (2.0 * rng.uniform() - 1.0);

    const Policy pi = random_policy(mdp.n_states, mdp.n_actions, rng);
    EvalConfig cfg;
    cfg.n_sweeps = 7; // far from converged
    const QTable q_hat = evaluate_offline(model, &mdp, pi, cfg);
    const QTable q_true = exact_q(mdp, pi, 1e-13);
    const QTable q_err = q_tilde(mdp, pi, epsilon_beta(mdp, pi, q_hat), 1e-13);
    for (std::size_t k = 0; k < q_hat.values.size(); ++k)
        CHECK(std::fabs(q_hat.values[k] - q_true.values[k] - q_err.values[k]) < 1e-8);
}

TEST_CASE("converged error table does not depend on the policy") {
    Rng rng(8);
    const TabularMdp mdp = random_mdp(6, 3, 0.9, rng);
    EmpiricalModel model = exact_model_of(mdp);
    for (std::size_t k = 0; k < model.reward_hat.size(); ++k)
        model.reward_hat[k] += 0.4 * (2.0 * rng.uniform() - 1.0);

    EvalConfig cfg;
    cfg.tol = 1e-13;
    const Policy pi1 = random_policy(6, 3, rng);
    const Policy pi2 = random_policy(6, 3, rng);
    const ErrorTable e1 = epsilon_beta(mdp, pi1, evaluate_offline(model, &mdp, pi1, cfg));
    const ErrorTable e2 = epsilon_beta(mdp, pi2, evaluate_offline(model, &mdp, pi2, cfg));
    for (std::size_t k = 0; k < e1.epsilon.size(); ++k)
        CHECK(std::fabs(e1.epsilon[k] - e2.epsilon[k]) < 1e-10);
}

TEST_CASE("bellman_residual") {
    Rng rng(9);
    const TabularMdp mdp = random_mdp(6, 3, 0.9, rng);
    EmpiricalModel model = exact_model_of(mdp);
    const Policy pi = random_policy(6, 3, rng);
    EvalConfig cfg;
    cfg.tol = 1e-11;

    const QTable q = evaluate_offline(model, &mdp, pi, cfg);
    CHECK(bellman_residual(q, pi, &model, &mdp, cfg) <= 1e-11);

    QTable zeros = QTable::zeros(6, 3);
    double max_r = 0.0;
    for (double r : model.reward_hat) max_r = std::max(max_r, std::fabs(r));
    CHECK(bellman_residual(zeros, pi, &model, &mdp, cfg) == doctest::Approx(max_r));
}

TEST_CASE("sweeps contract at rate gamma") {
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        const int S = 3 + static_cast<int>(rng.uniform() * 6);
        const int A = 2 + static_cast<int>(rng.uniform() * 3);
        const double gamma = 0.5 + 0.45 * rng.uniform();
        const TabularMdp mdp = random_mdp(S, A, gamma, rng);
        EmpiricalModel model = exact_model_of(mdp);
        const Policy pi = random_policy(S, A, rng);

        EvalConfig cfg;
        double prev = -1.0;
        QTable q{S, A, model.reward_hat};
        for (int sweeps = 0; sweeps <= 4; ++sweeps) {
            const double res = bellman_residual(q, pi, &model, &mdp, cfg);
            if (prev >= 0.0) CHECK(res <= gamma * prev + 1e-12);
            prev = res;
            cfg.n_sweeps = 1;
            cfg.warm_start = WarmStart::PreviousQ;
            q = evaluate_offline(model, &mdp, pi, cfg, &q);
        }
    }
}

TEST_CASE("warm start and reward init reach the same fixed point") {
    Rng rng(11);
    const TabularMdp mdp = random_mdp(7, 3, 0.9, rng);
    EmpiricalModel model = exact_model_of(mdp);
    for (double& r : model.reward_hat) r += 0.2 * (2.0 * rng.uniform() - 1.0);
    const Policy pi = random_policy(7, 3, rng);

    EvalConfig cold;
    cold.tol = 1e-12;
    const QTable q_cold = evaluate_offline(model, &mdp, pi, cold);

    EvalConfig warm = cold;
    warm.warm_start = WarmStart::PreviousQ;
    QTable far = QTable::zeros(7, 3);
    for (double& v : far.values) v = 5.0 * (2.0 * rng.uniform() - 1.0);
    const QTable q_warm = evaluate_offline(model, &mdp, pi, warm, &far);
    for (std::size_t k = 0; k < q_cold.values.size(); ++k)
        CHECK(std::fabs(q_cold.values[k] - q_warm.values[k]) <= 2.0 * cold.tol * 10.0);
}

TEST_SUITE_END();
