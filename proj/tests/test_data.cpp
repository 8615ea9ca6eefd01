#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include <doctest.h>

#include "lab/data.hpp"
#include "lab/experiment.hpp"
#include "testutil.hpp"

using namespace lab;

namespace {

Policy reference_behavior(const TabularMdp& mdp) {
    return mix_policies(optimal_policy(mdp), Policy::uniform(mdp.n_states, mdp.n_actions), 0.2);
}

} // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("collect produces the requested step count") {
    const TabularMdp mdp = build_gridworld(GridSpec{15, 15}, 0.9);
    Rng rng(0);
    const Dataset d = collect(mdp, reference_behavior(mdp), 100, 100, rng);
    CHECK(d.trajectories.size() == 100);
    CHECK(d.step_count() == 10'000);
    for (const auto& traj : d.trajectories) {
        CHECK(traj.size() == 100);
        for (std::size_t t = 0; t + 1 < traj.size(); ++t)
            CHECK(traj[t].next_state == traj[t + 1].state); // contiguous rollout
    }
}

TEST_CASE("collect with zero trajectories is a valid empty dataset") {
    const TabularMdp mdp = build_gridworld(GridSpec{3, 3}, 0.9);
    Rng rng(1);
    const Dataset d = collect(mdp, Policy::uniform(9, 4), 0, 10, rng);
    CHECK(d.empty());
    CHECK_THROWS_AS(fit_empirical(d, 9, 4), std::invalid_argument);
}

TEST_CASE("deterministic rewards are recorded exactly") {
    const TabularMdp mdp = labtest::one_state_mdp({1.0}, 0.9);
    Rng rng(2);
    const Dataset d = collect(mdp, Policy::uniform(1, 1), 3, 20, rng);
    for (const auto& traj : d.trajectories)
        for (const Step& s : traj) CHECK(s.reward == 1.0);
}

TEST_CASE("mix_datasets endpoints and proportions") {
    const TabularMdp mdp = build_gridworld(GridSpec{4, 4}, 0.9);
    Rng rng(3);
    Dataset a = collect(mdp, Policy::uniform(16, 4), 50, 5, rng);
    Dataset b = collect(mdp, down_left_policy(GridSpec{4, 4}), 50, 5, rng);
    a.provenance = "a";
    b.provenance = "b";

    Rng mix_rng(4);
    const Dataset all_b = mix_datasets(a, b, 0.0, 30, mix_rng);
    for (const auto& traj : all_b.trajectories)
        CHECK(traj.front().action != static_cast<int>(GridAction::Up)); // b never goes up
    const Dataset all_a = mix_datasets(a, b, 1.0, 30, mix_rng);
    CHECK(all_a.trajectories.size() == 30);

    CHECK_THROWS_AS(mix_datasets(a, b, 1.5, 10, mix_rng), std::invalid_argument);

    // p = 0.5 with 10,000 draws lands within 3 sigma of a 50/50 split; tag
    // the sources by constant rewards so attribution is unambiguous
    const TabularMdp tag_one = labtest::one_state_mdp({1.0}, 0.9);
    const TabularMdp tag_zero = labtest::one_state_mdp({0.0}, 0.9);
    Rng tag_rng(5);
    const Dataset src_a = collect(tag_one, Policy::uniform(1, 1), 40, 3, tag_rng);
    const Dataset src_b = collect(tag_zero, Policy::uniform(1, 1), 40, 3, tag_rng);
    Rng big_rng(6);
    const Dataset mixed = mix_datasets(src_a, src_b, 0.5, 10'000, big_rng);
    long from_a = 0;
    for (const auto& traj : mixed.trajectories)
        if (traj.front().reward == 1.0) ++from_a;
    const double sigma = std::sqrt(0.25 / 10'000.0);
    CHECK(std::fabs(from_a / 10'000.0 - 0.5) < 3.0 * sigma);
}

TEST_CASE("fit_empirical recovers a fully covered noise-free model") {
    const TabularMdp mdp = build_gridworld(GridSpec{3, 3}, 0.9);
    TabularMdp quiet = mdp;
    quiet.reward_noise_std.assign(quiet.reward_noise_std.size(), 0.0);
    quiet.finalize();
    Rng rng(6);
    const Dataset d = collect(quiet, Policy::uniform(9, 4), 400, 25, rng);
    const EmpiricalModel m = fit_empirical(d, 9, 4);
    for (int s = 0; s < 9; ++s)
        for (int a = 0; a < 4; ++a) {
            REQUIRE(m.visits(s, a) > 0);
            CHECK(m.reward(s, a) == quiet.reward(s, a));
            // deterministic transitions estimated exactly
            CHECK(m.transition_hat[(s * 4 + a) * 9 + quiet.next_state[s * 4 + a]] == 1.0);
        }
}

TEST_CASE("fit_empirical fallbacks at unvisited entries") {
    Dataset d;
    d.trajectories = {{Step{0, 0, 1.0, 1}}};
    const EmpiricalModel m = fit_empirical(d, 3, 2);
    CHECK(m.reward(2, 1) == 0.0);
    CHECK(m.transition_hat[(2 * 2 + 1) * 3 + 2] == 1.0); // self loop
    CHECK(m.behavior_hat.at(2, 0) == 0.5);               // uniform at unseen state
    CHECK(m.behavior_hat.at(0, 0) == 1.0);               // MLE at seen state
}

TEST_CASE("fit_empirical agrees with an independent counting oracle") {
    const TabularMdp mdp = build_gridworld(GridSpec{15, 15}, 0.9);
    Rng rng(7);
    const Dataset d = collect(mdp, reference_behavior(mdp), 1, 100, rng);

    // oracle: naive maps, written independently of the fitting code
    std::map<std::pair<int, int>, std::pair<double, long>> sums;
    for (const auto& traj : d.trajectories)
        for (const Step& s : traj) {
            auto& cell = sums[{s.state, s.action}];
            cell.first += s.reward;
            cell.second += 1;
        }
    const EmpiricalModel m = fit_empirical(d, 225, 4);
    for (const auto& [sa, cell] : sums) {
        CHECK(m.visits(sa.first, sa.second) == cell.second);
        CHECK(m.reward(sa.first, sa.second) ==
              doctest::Approx(cell.first / cell.second).epsilon(1e-12));
    }
    CHECK(m.visits(112, 0) + m.visits(112, 1) + m.visits(112, 2) + m.visits(112, 3) ==
          (sums.count({112, 0}) ? sums[{112, 0}].second : 0) +
              (sums.count({112, 1}) ? sums[{112, 1}].second : 0) +
              (sums.count({112, 2}) ? sums[{112, 2}].second : 0) +
              (sums.count({112, 3}) ? sums[{112, 3}].second : 0));
}

TEST_CASE("reward estimates tighten with more data") {
    const TabularMdp mdp = build_gridworld(GridSpec{15, 15}, 0.9);
    const Policy beta = Policy::uniform(225, 4);

    auto max_err_at = [&](int n_traj, std::uint64_t seed, long min_visits) {
        Rng rng(seed);
        const Dataset d = collect(mdp, beta, n_traj, 100, rng);
        const EmpiricalModel m = fit_empirical(d, 225, 4);
        double worst = 0.0;
        for (int s = 0; s < 225; ++s)
            for (int a = 0; a < 4; ++a)
                if (m.visits(s, a) >= min_visits)
                    worst = std::max(worst, std::fabs(m.reward(s, a) - mdp.reward(s, a)));
        return worst;
    };

    const double coarse = max_err_at(1'000, 8, 100);
    const double fine = max_err_at(10'000, 8, 100);
    CHECK(fine < coarse);

    // 3-sigma bound from the known unit noise: every (s,a) with n >= 100
    // visits satisfies |err| <= 3 / sqrt(n) at this seed
    Rng rng(8);
    const Dataset d = collect(mdp, beta, 10'000, 100, rng);
    const EmpiricalModel m = fit_empirical(d, 225, 4);
    for (int s = 0; s < 225; ++s)
        for (int a = 0; a < 4; ++a) {
            const long n = m.visits(s, a);
            if (n < 100) continue;
            const double sigma = mdp.reward_noise_std[s * 4 + a];
            CHECK(std::fabs(m.reward(s, a) - mdp.reward(s, a)) <= 3.0 * sigma / std::sqrt(double(n)) + 1e-12);
        }
}

TEST_CASE("behavior estimate converges in total variation") {
    const TabularMdp mdp = build_gridworld(GridSpec{5, 5}, 0.9);
    const Policy beta = reference_behavior(mdp);
    Rng rng(9);
    const Dataset d = collect(mdp, beta, 4'000, 50, rng);
    const EmpiricalModel m = fit_empirical(d, 25, 4);

    std::vector<long> state_visits(25, 0);
    for (const auto& traj : d.trajectories)
        for (const Step& s : traj) state_visits[s.state] += 1;
    for (int s = 0; s < 25; ++s) {
        if (state_visits[s] < 1'000) continue;
        double tv = 0.0, bound = 0.0;
        for (int a = 0; a < 4; ++a) {
            const double p = beta.at(s, a);
            tv += 0.5 * std::fabs(m.behavior_hat.at(s, a) - p);
            bound += 0.5 * 3.0 * std::sqrt(p * (1 - p) / double(state_visits[s]));
        }
        CHECK(tv <= bound);
    }
}

TEST_CASE("fit_empirical is deterministic") {
    const TabularMdp mdp = build_gridworld(GridSpec{4, 4}, 0.9);
    Rng rng(10);
    const Dataset d = collect(mdp, Policy::uniform(16, 4), 20, 30, rng);
    const EmpiricalModel m1 = fit_empirical(d, 16, 4);
    const EmpiricalModel m2 = fit_empirical(d, 16, 4);
    CHECK(m1.reward_hat == m2.reward_hat);
    CHECK(m1.transition_hat == m2.transition_hat);
    CHECK(m1.behavior_hat.probs == m2.behavior_hat.probs);
}

TEST_CASE("dataset csv round trip") {
    const TabularMdp mdp = build_gridworld(GridSpec{6, 6}, 0.9);
    Rng rng(11);
    const Dataset d = collect(mdp, Policy::uniform(36, 4), 7, 13, rng);

    const auto path = std::filesystem::temp_directory_path() / "lab_dataset_roundtrip.csv";
    write_dataset_csv(path, d, {"seed=11"});
    const Dataset back = read_dataset_csv(path);
    REQUIRE(back.trajectories.size() == d.trajectories.size());
    for (std::size_t i = 0; i < d.trajectories.size(); ++i) {
        REQUIRE(back.trajectories[i].size() == d.trajectories[i].size());
        for (std::size_t t = 0; t < d.trajectories[i].size(); ++t) {
            CHECK(back.trajectories[i][t].state == d.trajectories[i][t].state);
            CHECK(back.trajectories[i][t].action == d.trajectories[i][t].action);
            CHECK(back.trajectories[i][t].next_state == d.trajectories[i][t].next_state);
            CHECK(back.trajectories[i][t].reward == d.trajectories[i][t].reward); // 17 digits
        }
    }
    std::filesystem::remove(path);

    CHECK_THROWS(read_dataset_csv(std::filesystem::temp_directory_path() / "lab_missing.csv"));
}

TEST_CASE("dataset csv rejects malformed files") {
    namespace fs = std::filesystem;
    const auto path = fs::temp_directory_path() / "lab_dataset_bad.csv";

    std::ofstream(path) << "state,action\n0,1\n";
    CHECK_THROWS_WITH_AS(read_dataset_csv(path), doctest::Contains("header"), std::runtime_error);

    std::ofstream(path) << "traj_id,t,state,action,reward,next_state\n0,0,1,2\n";
    CHECK_THROWS_WITH_AS(read_dataset_csv(path), doctest::Contains("short row"), std::runtime_error);

    std::ofstream(path) << "traj_id,t,state,action,reward,next_state\n3,0,1,2,0.5,1\n";
    CHECK_THROWS_WITH_AS(read_dataset_csv(path), doctest::Contains("contiguous"), std::runtime_error);

    fs::remove(path);
}

TEST_SUITE_END();
