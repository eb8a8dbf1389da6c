#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <thread>

#include "environment.hpp"
#include "test_support.hpp"

using namespace svrl;

namespace {

ProblemSpec make_problem(int bin = 0, Token golden = 0, int alphabet = 4) {
    return ProblemSpec{"p", bin, golden, alphabet};
}

}  // namespace

TEST_CASE("golden validation") {
    ProblemSpec problem = make_problem(0, 0, 2);
    CHECK(v_golden(Action::solve(0), problem) == Verdict::Correct);
    CHECK(v_golden(Action::solve(1), problem) == Verdict::Incorrect);
    CHECK_THROWS_AS(v_golden(Action::end(), problem), Error);
}

TEST_CASE("problem generation is deterministic and exactly apportioned") {
    ProblemSet a = generate_problems(100, 4, 8, {}, 42);
    ProblemSet b = generate_problems(100, 4, 8, {}, 42);
    REQUIRE(a.size() == 100);
    std::map<int, int> per_bin;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.at(i).id == b.at(i).id);
        CHECK(a.at(i).golden_answer == b.at(i).golden_answer);
        CHECK(a.at(i).alphabet_size == 8);
        ++per_bin[a.at(i).difficulty_bin];
    }
    for (int bin = 0; bin < 4; ++bin) CHECK(per_bin[bin] == 25);

    ProblemSet weighted = generate_problems(10, 2, 4, {3.0, 1.0}, 1);
    int bin0 = 0;
    for (std::size_t i = 0; i < weighted.size(); ++i)
        if (weighted.at(i).difficulty_bin == 0) ++bin0;
    CHECK(bin0 == 8);  // 7.5 rounds up by largest remainder
    CHECK(generate_problems(0, 4, 8, {}, 1).empty());
}

TEST_CASE("saturated logits force the one-round path") {
    SyntheticPolicy policy = SyntheticPolicy::constant(1, 20.0, 20.0, 20.0);
    ProblemSpec problem = make_problem();
    RandomSource rng(1);
    for (int i = 0; i < 100; ++i) {
        SampledTrajectory sample = sample_trajectory(policy, problem, rng, 8);
        REQUIRE(sample.trajectory.action_count() == 3);
        CHECK(sample.trajectory.actions[0].answer_token == problem.golden_answer);
        CHECK(sample.trajectory.actions[1].parsed_verdict == Verdict::Correct);
        CHECK(sample.trajectory.terminated());
    }
}

TEST_CASE("first-solve frequency matches the logistic mean") {
    // theta_solve = 0 gives p = 0.5; Monte Carlo at n = 10,000.
    SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.0, 1.0, 1.0);
    ProblemSpec problem = make_problem();
    RandomSource rng(42);
    int correct_first = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        SampledTrajectory sample = sample_trajectory(policy, problem, rng, 1);
        if (sample.trajectory.actions[0].answer_token == problem.golden_answer)
            ++correct_first;
    }
    CHECK(std::abs(correct_first / static_cast<double>(n) - 0.5) < 0.02);
}

TEST_CASE("fixed seed reproduces trajectories exactly") {
    SyntheticPolicy policy = SyntheticPolicy::constant(2, 0.3, 0.7, -0.2);
    ProblemSpec problem = make_problem(1, 2, 5);
    RandomSource rng_a(42), rng_b(42);
    for (int i = 0; i < 20; ++i) {
        SampledTrajectory a = sample_trajectory(policy, problem, rng_a, 6);
        SampledTrajectory b = sample_trajectory(policy, problem, rng_b, 6);
        CHECK(a.trajectory == b.trajectory);
        CHECK(a.action_logps == b.action_logps);
    }
}

TEST_CASE("sampled trajectories validate and record exact log-probs") {
    SyntheticPolicy policy = SyntheticPolicy::constant(1, -0.4, 0.8, 0.5);
    ProblemSpec problem = make_problem(0, 1, 6);
    RandomSource rng(9);
    for (int i = 0; i < 200; ++i) {
        SampledTrajectory sample = sample_trajectory(policy, problem, rng, 4);
        if (sample.trajectory.terminated()) {
            CHECK(validate_trajectory(sample.trajectory, 9, problem.golden_answer)
                      .accepted());
        }
        // Recorded per-outcome log-probs equal the analytic evaluation.
        double recorded = 0.0;
        for (double v : sample.action_logps) recorded += v;
        CHECK(recorded ==
              doctest::Approx(trajectory_log_prob(policy, problem, sample.trajectory))
                  .epsilon(1e-12));
    }
}

TEST_CASE("trajectory log-prob closed forms") {
    SUBCASE("single round correct is a product of two Bernoullis") {
        SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.0, 0.0, 0.0);
        ProblemSpec problem = make_problem(0, 0, 2);
        Trajectory traj = testsupport::trajectory_from_symbols("sCe");
        CHECK(trajectory_log_prob(policy, problem, traj) ==
              doctest::Approx(std::log(0.5) + std::log(0.5)).epsilon(1e-12));
    }
    SUBCASE("unused difficulty bins do not matter") {
        SyntheticPolicy a({0.3, 5.0}, {0.1, -2.0}, {0.2, 3.0});
        SyntheticPolicy b({0.3, -7.0}, {0.1, 4.0}, {0.2, 0.0});
        ProblemSpec problem = make_problem(0, 0, 3);
        RandomSource rng(3);
        for (int i = 0; i < 50; ++i) {
            Trajectory traj = testsupport::random_valid_trajectory(problem, rng, 4);
            CHECK(trajectory_log_prob(a, problem, traj) ==
                  trajectory_log_prob(b, problem, traj));
        }
    }
    SUBCASE("wrong answers include the uniform choice term") {
        SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.0, 0.0, 0.0);
        ProblemSpec problem = make_problem(0, 0, 5);
        Trajectory traj;
        traj.problem_id = "p";
        traj.actions.push_back(Action::solve(3));
        CHECK(trajectory_log_prob(policy, problem, traj) ==
              doctest::Approx(std::log(0.5) - std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("grammar-impossible actions are rejected") {
        SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.0, 0.0, 0.0);
        ProblemSpec problem = make_problem(0, 0, 2);
        CHECK_THROWS_AS(
            trajectory_log_prob(policy, problem, testsupport::trajectory_from_symbols("ss")),
            Error);
        CHECK_THROWS_AS(
            trajectory_log_prob(policy, problem, testsupport::trajectory_from_symbols("sIe")),
            Error);
        CHECK_THROWS_AS(
            trajectory_log_prob(policy, problem, testsupport::trajectory_from_symbols("sCs")),
            Error);
    }
}

TEST_CASE("log-prob gradient matches finite differences") {
    // 100 random (policy, trajectory) pairs; h = 1e-5, rel err < 1e-6.
    RandomSource rng(2024);
    for (int rep = 0; rep < 100; ++rep) {
        const int bins = 1 + static_cast<int>(rng.next_uint(3));
        std::vector<double> solve(bins), tp(bins), tn(bins);
        for (int b = 0; b < bins; ++b) {
            solve[b] = 4.0 * rng.next_double() - 2.0;
            tp[b] = 4.0 * rng.next_double() - 2.0;
            tn[b] = 4.0 * rng.next_double() - 2.0;
        }
        SyntheticPolicy policy(solve, tp, tn);
        ProblemSpec problem{"p", static_cast<int>(rng.next_uint(bins)),
                            static_cast<Token>(rng.next_uint(3)), 4};
        Trajectory traj = testsupport::random_valid_trajectory(problem, rng, 4);

        std::vector<double> analytic(policy.param_count(), 0.0);
        accumulate_trajectory_log_prob_grad(policy, problem, traj, analytic, 1.0);
        auto fd = testsupport::finite_difference_grad(
            [&](const std::vector<double>& params) {
                return trajectory_log_prob(SyntheticPolicy::from_params(params), problem,
                                           traj);
            },
            policy.to_params(), 1e-5);
        CHECK(testsupport::gradient_relative_error(analytic, fd) < 1e-6);
    }
}

TEST_CASE("action-outcome frequencies converge to the logistic probabilities") {
    // Empirical frequencies within 3 sigma at n = 10,000 per outcome.
    SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.8, -0.3, 0.6);
    ProblemSpec problem = make_problem(0, 0, 3);
    RandomSource rng(77);
    const int n = 10000;
    int solve_correct = 0, tp_n = 0, tp_hits = 0, tn_n = 0, tn_hits = 0;
    for (int i = 0; i < n; ++i) {
        SampledTrajectory sample = sample_trajectory(policy, problem, rng, 1);
        const bool golden = sample.trajectory.actions[0].answer_token == problem.golden_answer;
        const bool verdict_correct =
            sample.trajectory.actions[1].parsed_verdict == Verdict::Correct;
        if (golden) {
            ++solve_correct;
            ++tp_n;
            if (verdict_correct) ++tp_hits;
        } else {
            ++tn_n;
            if (!verdict_correct) ++tn_hits;
        }
    }
    auto within3sigma = [](int hits, int total, double p) {
        const double sigma = std::sqrt(p * (1.0 - p) / total);
        return std::abs(hits / static_cast<double>(total) - p) <= 3.0 * sigma;
    };
    CHECK(within3sigma(solve_correct, n, policy.p_solve(0)));
    CHECK(within3sigma(tp_hits, tp_n, policy.p_verify_tp(0)));
    CHECK(within3sigma(tn_hits, tn_n, policy.p_verify_tn(0)));
}

TEST_CASE("problem accuracy estimation") {
    ProblemSpec problem = make_problem(0, 0, 4);
    RandomSource rng(5);
    SUBCASE("saturated-correct policy scores 1.0") {
        SyntheticPolicy policy = SyntheticPolicy::constant(1, 25.0, 25.0, 25.0);
        CHECK(estimate_problem_accuracy(policy, problem, 100, rng, 4) == 1.0);
    }
    SUBCASE("saturated-wrong policy scores 0.0") {
        SyntheticPolicy policy = SyntheticPolicy::constant(1, -25.0, 25.0, 25.0);
        CHECK(estimate_problem_accuracy(policy, problem, 100, rng, 2) == 0.0);
    }
    SUBCASE("two attempts with a perfect verifier: 1 - 0.5^2") {
        SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.0, 25.0, 25.0);
        double accuracy = estimate_problem_accuracy(policy, problem, 10000, rng, 2);
        CHECK(std::abs(accuracy - 0.75) < 0.02);
    }
}

TEST_CASE("concurrent samplers with derived seeds match the serial order") {
    // Sampling is pure given a per-(worker, index) derived seed, so a
    // threaded split must reproduce the serial result exactly.
    SyntheticPolicy policy = SyntheticPolicy::constant(2, 0.1, 0.6, 0.4);
    ProblemSet problems = generate_problems(32, 2, 5, {}, 61);
    const int per_problem = 8;

    std::vector<Trajectory> serial(problems.size() * per_problem);
    for (std::size_t pi = 0; pi < problems.size(); ++pi)
        for (int m = 0; m < per_problem; ++m) {
            RandomSource rng(derive_seed(99, pi, m));
            serial[pi * per_problem + m] =
                sample_trajectory(policy, problems.at(pi), rng, 4).trajectory;
        }

    std::vector<Trajectory> threaded(problems.size() * per_problem);
    std::vector<std::thread> workers;
    for (int w = 0; w < 4; ++w) {
        workers.emplace_back([&, w]() {
            for (std::size_t pi = w; pi < problems.size(); pi += 4)
                for (int m = 0; m < per_problem; ++m) {
                    RandomSource rng(derive_seed(99, pi, m));
                    threaded[pi * per_problem + m] =
                        sample_trajectory(policy, problems.at(pi), rng, 4).trajectory;
                }
        });
    }
    for (std::thread& worker : workers) worker.join();
    CHECK(threaded == serial);
}

TEST_CASE("policy parameter vector round trip") {
    SyntheticPolicy policy({0.1, 0.2}, {-0.3, 0.4}, {0.5, -0.6});
    CHECK(SyntheticPolicy::from_params(policy.to_params()) == policy);
    CHECK(policy.param_count() == 6);
    CHECK(policy.solve_param(1) == 1);
    CHECK(policy.tp_param(0) == 2);
    CHECK(policy.tn_param(1) == 5);
    CHECK_THROWS_AS(SyntheticPolicy({0.0}, {0.0}, {}), Error);
    CHECK_THROWS_AS(
        SyntheticPolicy({std::numeric_limits<double>::infinity()}, {0.0}, {0.0}), Error);
}
