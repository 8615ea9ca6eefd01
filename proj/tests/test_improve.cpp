#include <cmath>

#include <doctest.h>

#include "lab/diag.hpp"
#include "lab/improve.hpp"
#include "testutil.hpp"

using namespace lab;
using labtest::random_policy;
using labtest::random_q;

namespace {

/// Brute-force oracle: enumerate all m-tuples of actions and accumulate the
/// probability of each argmax outcome. Exponential in m; only for tiny m.
Policy bcq_enumeration_oracle(const QTable& q, const Policy& prev, int m) {
    const int A = q.n_actions;
    Policy out = Policy::zeros(q.n_states, A);
    std::vector<int> tuple(m, 0);
    for (int s = 0; s < q.n_states; ++s) {
        tuple.assign(m, 0);
        while (true) {
            double prob = 1.0;
            int best = tuple[0];
            for (int j = 0; j < m; ++j) {
                prob *= prev.at(s, tuple[j]);
                const int a = tuple[j];
                const bool better = q.at(s, a) > q.at(s, best) ||
                                    (q.at(s, a) == q.at(s, best) && a < best);
                if (better) best = a;
            }
            out.at(s, best) += prob;
            int j = 0;
            for (; j < m; ++j) {
                if (++tuple[j] < A) break;
                tuple[j] = 0;
            }
            if (j == m) break;
        }
    }
    return out;
}

double regularized_objective(const QTable& q, const Policy& pi, const Policy& beta, double alpha, int s) {
    double value = 0.0, kl = 0.0;
    for (int a = 0; a < q.n_actions; ++a) {
        const double p = pi.at(s, a);
        value += p * q.at(s, a);
        if (p > 0.0) kl += p * std::log(p / beta.at(s, a));
    }
    return value - alpha * kl;
}

} // namespace

TEST_SUITE_BEGIN("improve");

TEST_CASE("behavior cloning is the identity") {
    Rng rng(1);
    const Policy beta = random_policy(5, 3, rng);
    CHECK(behavior_clone(beta).probs == beta.probs);
    const Policy u = Policy::uniform(4, 4);
    CHECK(behavior_clone(u).probs == u.probs);
}

TEST_CASE("easy_bcq single sample is the identity") {
    Rng rng(2);
    const Policy prev = random_policy(6, 4, rng);
    const QTable q = random_q(6, 4, rng);
    CHECK(easy_bcq(q, prev, 1).probs == prev.probs);
}

TEST_CASE("easy_bcq two-action worked example") {
    Policy prev = Policy::zeros(1, 2);
    prev.at(0, 0) = 0.5;
    prev.at(0, 1) = 0.5;
    QTable q = QTable::zeros(1, 2);
    q.at(0, 0) = 1.0;
    q.at(0, 1) = 0.0;
    const Policy out = easy_bcq(q, prev, 2);
    CHECK(out.at(0, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(out.at(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("easy_bcq closed form equals tuple enumeration") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int A = 2 + static_cast<int>(rng.uniform() * 3);
        const Policy prev = random_policy(3, A, rng);
        QTable q = random_q(3, A, rng);
        if (trial % 4 == 0) q.at(0, 1) = q.at(0, 0); // exercise tie-breaking
        for (int m : {2, 3, 4}) {
            const Policy closed = easy_bcq(q, prev, m);
            const Policy brute = bcq_enumeration_oracle(q, prev, m);
            for (std::size_t i = 0; i < closed.probs.size(); ++i)
                CHECK(closed.probs[i] == doctest::Approx(brute.probs[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("easy_bcq large m concentrates on the best supported action") {
    Rng rng(4);
    const Policy prev = random_policy(4, 4, rng);
    const QTable q = random_q(4, 4, rng);
    const Policy out = easy_bcq(q, prev, 1'000'000);
    for (int s = 0; s < 4; ++s) {
        int best = -1;
        for (int a = 0; a < 4; ++a)
            if (prev.at(s, a) > 0.0 && (best < 0 || q.at(s, a) > q.at(s, best))) best = a;
        CHECK(out.at(s, best) > 1.0 - 1e-4);
    }
}

TEST_CASE("easy_bcq closed form matches Monte Carlo draws") {
    Rng rng(5);
    const Policy prev = random_policy(2, 4, rng);
    const QTable q = random_q(2, 4, rng);
    for (int m : {2, 5, 10}) {
        const Policy closed = easy_bcq(q, prev, m);
        Rng mc_rng(600 + m);
        const long draws = 200'000;
        const Policy sampled = easy_bcq_sampled(q, prev, m, draws, mc_rng);
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 4; ++a) {
                const double p = closed.at(s, a);
                const double sigma = std::sqrt(std::max(p * (1 - p), 1e-12) / draws);
                CHECK(std::fabs(sampled.at(s, a) - p) <= 3.0 * sigma + 1e-9);
            }
    }
}

TEST_CASE("reverse_kl returns the behavior under constant q") {
    Rng rng(6);
    const Policy beta = random_policy(5, 3, rng);
    QTable q = QTable::zeros(5, 3);
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 3; ++a) q.at(s, a) = 0.7; // constant per state
    const Policy out = reverse_kl(q, beta, 0.5);
    for (std::size_t i = 0; i < out.probs.size(); ++i)
        CHECK(out.probs[i] == doctest::Approx(beta.probs[i]).epsilon(1e-15));
}

TEST_CASE("reverse_kl closed-form worked example") {
    Policy beta = Policy::zeros(1, 2);
    beta.at(0, 0) = 0.5;
    beta.at(0, 1) = 0.5;
    QTable q = QTable::zeros(1, 2);
    q.at(0, 0) = 1.0;
    const Policy out = reverse_kl(q, beta, 1.0);
    const double e = std::exp(1.0);
    CHECK(out.at(0, 0) == doctest::Approx(e / (1.0 + e)).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(1.0 / (1.0 + e)).epsilon(1e-12));
}

TEST_CASE("reverse_kl regularization limits") {
    Rng rng(7);
    const Policy beta = random_policy(6, 4, rng);
    const QTable q = random_q(6, 4, rng, 5.0);

    const Policy heavy = reverse_kl(q, beta, 1e9);
    for (std::size_t i = 0; i < heavy.probs.size(); ++i)
        CHECK(std::fabs(heavy.probs[i] - beta.probs[i]) < 1e-6);

    const Policy light = reverse_kl(q, beta, 1e-9);
    for (int s = 0; s < 6; ++s) {
        int q_best = -1, pi_best = 0;
        for (int a = 0; a < 4; ++a) {
            if (beta.at(s, a) > 0.0 && (q_best < 0 || q.at(s, a) > q.at(s, q_best))) q_best = a;
            if (light.at(s, a) > light.at(s, pi_best)) pi_best = a;
        }
        CHECK(pi_best == q_best);
    }
}

TEST_CASE("reverse_kl output maximizes the regularized objective") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const Policy beta = random_policy(2, 4, rng);
        const QTable q = random_q(2, 4, rng, 2.0);
        const double alpha = 0.05 + 2.0 * rng.uniform();
        const Policy star = reverse_kl(q, beta, alpha);
        for (int perturb = 0; perturb < 100; ++perturb) {
            const Policy other = random_policy(2, 4, rng);
            for (int s = 0; s < 2; ++s)
                CHECK(regularized_objective(q, star, beta, alpha, s) >=
                      regularized_objective(q, other, beta, alpha, s) - 1e-9);
        }
    }
}

TEST_CASE("reverse_kl deviation shrinks as alpha grows") {
    Rng rng(9);
    const std::vector<double> alpha_grid = {0.03, 0.1, 0.3, 1.0, 3.0, 10.0};
    const std::vector<double> w = {1.0};
    for (int trial = 0; trial < 50; ++trial) {
        const Policy beta = random_policy(1, 4, rng);
        const QTable q = random_q(1, 4, rng, 3.0);
        double prev_kl = -1.0;
        for (double alpha : alpha_grid) {
            const double kl = policy_kl(reverse_kl(q, beta, alpha), beta, w);
            if (prev_kl >= 0.0) CHECK(kl <= prev_kl + 1e-12);
            prev_kl = kl;
        }
    }
}

TEST_CASE("reverse_kl scale covariance") {
    Rng rng(10);
    const Policy beta = random_policy(4, 3, rng);
    const QTable q = random_q(4, 3, rng, 2.0);
    const double alpha = 0.7;
    const Policy base = reverse_kl(q, beta, alpha);

    // powers of two scale exactly
    for (double c : {2.0, 0.5, 8.0}) {
        QTable cq = q;
        for (double& v : cq.values) v *= c;
        CHECK(reverse_kl(cq, beta, c * alpha).probs == base.probs);
    }
    // arbitrary positive scales agree to rounding
    for (double c : {3.7, 0.13}) {
        QTable cq = q;
        for (double& v : cq.values) v *= c;
        const Policy scaled = reverse_kl(cq, beta, c * alpha);
        for (std::size_t i = 0; i < scaled.probs.size(); ++i)
            CHECK(scaled.probs[i] == doctest::Approx(base.probs[i]).epsilon(1e-12));
    }
}

TEST_CASE("exp_weighted reduces to empirical frequencies under constant q") {
    Dataset d;
    d.trajectories = {{Step{0, 0, 0.0, 0}, Step{0, 0, 0.0, 0}, Step{0, 1, 0.0, 0}}};
    QTable q = QTable::zeros(1, 2);
    q.at(0, 0) = 0.4;
    q.at(0, 1) = 0.4;
    const Policy beta = Policy::uniform(1, 2);
    const Policy out = exp_weighted(q, d, beta, 1.0, 100.0);
    CHECK(out.at(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("exp_weighted hand-computed example") {
    Dataset d;
    d.trajectories = {{Step{0, 0, 0.0, 0}, Step{0, 0, 0.0, 0}, Step{0, 1, 0.0, 0}}};
    QTable q = QTable::zeros(1, 2);
    q.at(0, 0) = 1.0;
    q.at(0, 1) = 0.0;
    // behavior here is the empirical MLE (2/3, 1/3), so V = 2/3
    Policy beta = Policy::zeros(1, 2);
    beta.at(0, 0) = 2.0 / 3.0;
    beta.at(0, 1) = 1.0 / 3.0;
    const Policy out = exp_weighted(q, d, beta, 1.0, 100.0);
    const double w0 = std::exp(1.0 / 3.0), w1 = std::exp(-2.0 / 3.0);
    CHECK(out.at(0, 0) == doctest::Approx(2 * w0 / (2 * w0 + w1)).epsilon(1e-12));
    CHECK(out.at(0, 0) == doctest::Approx(0.8447).epsilon(1e-4));
}

TEST_CASE("exp_weighted sharpens to the best observed action and clips") {
    Dataset d;
    d.trajectories = {{Step{0, 0, 0.0, 0}, Step{0, 1, 0.0, 0}}};
    QTable q = QTable::zeros(1, 2);
    q.at(0, 0) = 1.0;
    const Policy beta = Policy::uniform(1, 2);
    const Policy sharp = exp_weighted(q, d, beta, 50.0, 100.0);
    // both weights clip-bounded: exp(50 * 0.5) clips to 100, exp(-25) ~ 0
    CHECK(sharp.at(0, 0) > 0.999);

    const Policy clipped = exp_weighted(q, d, beta, 50.0, 2.0);
    CHECK(clipped.at(0, 0) == doctest::Approx(2.0 / (2.0 + std::exp(-25.0))).epsilon(1e-12));
}

TEST_CASE("exp_weighted is uniform at unvisited states") {
    Dataset d;
    d.trajectories = {{Step{0, 0, 0.0, 0}}};
    Rng rng(11);
    const QTable q = random_q(3, 2, rng);
    const Policy out = exp_weighted(q, d, Policy::uniform(3, 2), 1.0, 100.0);
    CHECK(out.at(1, 0) == 0.5);
    CHECK(out.at(2, 1) == 0.5);
}

TEST_CASE("operator argument errors") {
    Rng rng(13);
    const Policy beta = random_policy(2, 3, rng);
    const QTable q = random_q(2, 3, rng);
    Dataset d;
    d.trajectories = {{Step{0, 0, 0.0, 1}}};
    CHECK_THROWS_AS(easy_bcq(q, beta, 0), std::invalid_argument);
    CHECK_THROWS_AS(reverse_kl(q, beta, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(reverse_kl(q, beta, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_weighted(q, d, beta, 0.0, 100.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_weighted(q, d, beta, 1.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(easy_bcq(q, random_policy(3, 3, rng), 2), std::invalid_argument);

    // a behavior row without support cannot be reweighted
    Policy no_support = Policy::zeros(1, 2);
    QTable q1 = QTable::zeros(1, 2);
    CHECK_THROWS_AS(reverse_kl(q1, no_support, 1.0), std::invalid_argument);
}

TEST_CASE("all operators return valid policies") {
    Rng rng(12);
    Dataset d;
    d.trajectories = {{Step{0, 0, 0.1, 1}, Step{1, 2, -0.2, 2}, Step{2, 1, 0.0, 0}}};
    for (int trial = 0; trial < 25; ++trial) {
        const Policy beta = random_policy(3, 3, rng);
        const Policy prev = random_policy(3, 3, rng);
        const QTable q = random_q(3, 3, rng, 4.0);
        easy_bcq(q, prev, 1 + static_cast<int>(rng.uniform() * 20)).validate();
        reverse_kl(q, beta, 0.01 + 3.0 * rng.uniform()).validate();
        exp_weighted(q, d, beta, 0.1 + 5.0 * rng.uniform(), 100.0).validate();
    }
}

TEST_SUITE_END();
