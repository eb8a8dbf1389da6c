#include <doctest.h>

#include <cmath>
#include <set>

#include "process.hpp"
#include "test_support.hpp"

using namespace svrl;

namespace {

// Wraps hand-built trajectories as a rollout batch over one problem.
RolloutBatch batch_of(const std::vector<std::string>& symbol_lists,
                      const SyntheticPolicy& sampler, const ProblemSpec& problem) {
    RolloutBatch batch;
    ProblemRollout rollout;
    rollout.problem_index = 0;
    for (const std::string& symbols : symbol_lists) {
        SampledTrajectory sample;
        sample.trajectory = testsupport::trajectory_from_symbols(symbols, problem.id);
        for (std::size_t i = 0; i < sample.trajectory.actions.size(); ++i)
            sample.action_logps.push_back(
                action_log_prob(sampler, problem, sample.trajectory, i));
        rollout.samples.push_back(std::move(sample));
    }
    batch.rollouts.push_back(std::move(rollout));
    return batch;
}

const ProblemSpec kProblem{"p", 0, 0, 4};

}  // namespace

TEST_CASE("grouping by reward context") {
    SyntheticPolicy sampler = SyntheticPolicy::constant(1, 0.0, 0.0, 0.0);
    ProblemSet problems({kProblem});

    SUBCASE("two one-round trajectories split by the first solve's reward") {
        RolloutBatch batch = batch_of({"sCe", "wCe"}, sampler, kProblem);
        auto groups = group_by_reward_context(batch, problems);
        // Groups, in key order: () with both solves, (-1) with the verify
        // after the wrong solve, (+1) with the verify after the golden one.
        REQUIRE(groups.size() == 3);
        CHECK(groups[0].key == RewardContext{});
        CHECK(groups[0].members.size() == 2);
        CHECK(groups[1].key == RewardContext{-1});
        CHECK(groups[1].members.size() == 1);
        CHECK(groups[2].key == RewardContext{1});
        CHECK(groups[2].members.size() == 1);
    }
    SUBCASE("the (-1, +1) context gathers second attempts after caught failures") {
        RolloutBatch batch = batch_of({"wIsCe", "wIwCe", "sCe"}, sampler, kProblem);
        auto groups = group_by_reward_context(batch, problems);
        bool found = false;
        for (const auto& group : groups) {
            if (group.key == RewardContext{-1, 1}) {
                found = true;
                CHECK(group.members.size() == 2);
                for (const auto& member : group.members) CHECK(member.action_index == 2);
            }
        }
        CHECK(found);
    }
    SUBCASE("an empty batch yields no groups") {
        RolloutBatch batch;
        CHECK(group_by_reward_context(batch, problems).empty());
    }
    SUBCASE("end markers never join groups") {
        RolloutBatch batch = batch_of({"sCe"}, sampler, kProblem);
        auto groups = group_by_reward_context(batch, problems);
        std::size_t members = 0;
        for (const auto& group : groups) members += group.members.size();
        CHECK(members == 2);  // solve and verify only
    }
}

TEST_CASE("group baselines") {
    ContextGroup group;
    group.members = {{0, 0, 0, 1}, {0, 1, 0, 1}, {0, 2, 0, -1}, {0, 3, 0, -1}};
    CHECK(group_baseline(group) == 0.0);
    group.members = {{0, 0, 0, 1}};
    CHECK(group_baseline(group) == 1.0);
    group.members = {{0, 0, 0, 1}, {0, 1, 0, -1}, {0, 2, 0, -1}};
    CHECK(group_baseline(group) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    group.members.clear();
    CHECK_THROWS_AS(group_baseline(group), Error);
}

TEST_CASE("action advantages") {
    ContextGroup group;
    group.members = {{0, 0, 0, 1}, {0, 1, 0, 1}, {0, 2, 0, -1}, {0, 3, 0, -1}};
    SUBCASE("beta = 0 in a zero-mean group") {
        CHECK(action_advantage(group.members[0], group, 0.0, -1.0, -2.0) == 1.0);
    }
    SUBCASE("matching sampling and reference policies zero the KL term") {
        CHECK(action_advantage(group.members[0], group, 0.9, -1.3, -1.3) == 1.0);
    }
    SUBCASE("beta scales the per-action log-ratio") {
        // log-ratio -0.5 at beta 0.01 raises the advantage by 0.005.
        const double with_kl = action_advantage(group.members[0], group, 0.01, -1.5, -1.0);
        CHECK(with_kl == doctest::Approx(1.0 + 0.005).epsilon(1e-12));
    }
    SUBCASE("singleton groups zero the advantage up to the KL term") {
        ContextGroup singleton;
        singleton.members = {{0, 0, 0, 1}};
        CHECK(action_advantage(singleton.members[0], singleton, 0.0, -1.0, -1.0) == 0.0);
    }
}

TEST_CASE("per-group zero sum") {
    SyntheticPolicy sampler = SyntheticPolicy::constant(1, 0.2, 0.5, 0.4);
    ProblemSet problems = generate_problems(6, 1, 4, {}, 3);
    for (int rep = 0; rep < 50; ++rep) {
        RolloutBatch batch = sample_rollouts(sampler, problems, {0, 1, 2, 3, 4, 5}, 4, 4,
                                             1000 + rep);
        for (const auto& group : group_by_reward_context(batch, problems)) {
            const double baseline = group_baseline(group);
            double total = 0.0;
            for (const auto& member : group.members) total += member.reward - baseline;
            CHECK(std::abs(total) <= 1e-12);
        }
    }
}

TEST_CASE("grouping partitions all solve and verify actions") {
    SyntheticPolicy sampler = SyntheticPolicy::constant(1, -0.2, 0.3, 0.6);
    ProblemSet problems = generate_problems(5, 1, 4, {}, 4);
    RolloutBatch batch = sample_rollouts(sampler, problems, {0, 1, 2, 3, 4}, 4, 4, 9);

    std::size_t expected = 0;
    for (const auto& rollout : batch.rollouts)
        for (const auto& sample : rollout.samples)
            for (const auto& action : sample.trajectory.actions)
                if (action.kind != ActionType::End) ++expected;

    auto groups = group_by_reward_context(batch, problems);
    std::size_t total = 0;
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
    std::set<RewardContext> keys;
    for (const auto& group : groups) {
        CHECK(keys.insert(group.key).second);  // keys are distinct
        total += group.members.size();
        for (const auto& member : group.members)
            CHECK(seen.insert({member.rollout_index, member.sample_index,
                               member.action_index})
                      .second);
    }
    CHECK(total == expected);
}

TEST_CASE("group keys equal the reward prefix (brute force, k <= 3)") {
    SyntheticPolicy sampler = SyntheticPolicy::constant(1, 0.0, 0.0, 0.0);
    ProblemSet problems({kProblem});
    RolloutBatch batch = sample_rollouts(sampler, problems, {0, 0, 0, 0, 0, 0}, 4, 3, 77);
    for (const auto& group : group_by_reward_context(batch, problems)) {
        for (const auto& member : group.members) {
            const auto& sample = batch.rollouts[member.rollout_index].samples[member.sample_index];
            CHECK(group.key ==
                  reward_context(sample.trajectory, member.action_index, kProblem));
            CHECK(member.reward ==
                  action_reward(sample.trajectory, member.action_index, kProblem));
        }
    }
}

TEST_CASE("identical contexts always receive identical baselines") {
    SyntheticPolicy sampler = SyntheticPolicy::constant(1, 0.1, 0.4, 0.3);
    ProblemSet problems = generate_problems(8, 1, 4, {}, 12);
    RolloutBatch batch =
        sample_rollouts(sampler, problems, {0, 1, 2, 3, 4, 5, 6, 7}, 4, 4, 31);
    auto groups = group_by_reward_context(batch, problems);
    std::map<RewardContext, double> baseline_by_key;
    for (const auto& group : groups) baseline_by_key[group.key] = group_baseline(group);
    // Recompute per member: every member with the same context key sees the
    // same baseline, regardless of trajectory or position.
    for (const auto& group : groups)
        for (const auto& member : group.members) {
            const auto& sample = batch.rollouts[member.rollout_index].samples[member.sample_index];
            const ProblemSpec& problem =
                problems.at(batch.rollouts[member.rollout_index].problem_index);
            RewardContext key =
                reward_context(sample.trajectory, member.action_index, problem);
            CHECK(baseline_by_key.at(key) == group_baseline(group));
        }
}

TEST_CASE("process surrogate at theta = theta_old") {
    SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.3, 0.2, -0.4);
    ProblemSet problems({kProblem});
    RolloutBatch batch = batch_of({"wIsCe", "sCe", "wCe"}, policy, kProblem);

    SUBCASE("ratio-one reduction to per-action-averaged advantages") {
        LossGrad loss =
            process_surrogate_loss(batch, problems, policy, policy, policy, 0.2, 0.0);
        auto advantages = batch_action_advantages(batch, problems, policy, 0.0);
        double expected = 0.0;
        for (std::size_t si = 0; si < batch.rollouts[0].samples.size(); ++si) {
            const auto& traj = batch.rollouts[0].samples[si].trajectory;
            int count = 0;
            double sum = 0.0;
            for (std::size_t ai = 0; ai < traj.actions.size(); ++ai) {
                if (traj.actions[ai].kind == ActionType::End) continue;
                sum += advantages[0][si][ai];
                ++count;
            }
            expected += sum / count;
        }
        expected /= static_cast<double>(batch.rollouts[0].samples.size());
        CHECK(loss.value == doctest::Approx(-expected).epsilon(1e-12));
    }
    SUBCASE("uniform group rewards give zero loss and gradient") {
        RolloutBatch uniform = batch_of({"sCe", "sCe"}, policy, kProblem);
        LossGrad loss =
            process_surrogate_loss(uniform, problems, policy, policy, policy, 0.2, 0.0);
        CHECK(loss.value == 0.0);
        for (double g : loss.grad) CHECK(g == 0.0);
    }
}

TEST_CASE("process surrogate gradient matches finite differences") {
    // 50 random batches; h = 1e-5, rel err < 1e-5.
    RandomSource rng(808);
    for (int rep = 0; rep < 50; ++rep) {
        const int bins = 1 + static_cast<int>(rng.next_uint(2));
        std::vector<double> solve(bins), tp(bins), tn(bins);
        for (int b = 0; b < bins; ++b) {
            solve[b] = 2.0 * rng.next_double() - 1.0;
            tp[b] = 2.0 * rng.next_double() - 1.0;
            tn[b] = 2.0 * rng.next_double() - 1.0;
        }
        SyntheticPolicy policy(solve, tp, tn);
        SyntheticPolicy reference = SyntheticPolicy::constant(bins, -0.2, 0.3, 0.1);
        ProblemSet problems = generate_problems(3, bins, 4, {}, rep + 100);
        RolloutBatch batch =
            sample_rollouts(policy, problems, {0, 1, 2}, 4, 3, rep * 13 + 5);

        const double beta = rng.next_double() * 0.1;
        LossGrad analytic =
            process_surrogate_loss(batch, problems, policy, policy, reference, 0.2, beta);
        auto fd = testsupport::finite_difference_grad(
            [&](const std::vector<double>& params) {
                return process_surrogate_loss(batch, problems,
                                              SyntheticPolicy::from_params(params), policy,
                                              reference, 0.2, beta)
                    .value;
            },
            policy.to_params(), 1e-5);
        CHECK(testsupport::gradient_relative_error(analytic.grad, fd) < 1e-5);
    }
}

TEST_CASE("perfect verifier leaves verify parameters untouched") {
    // All verify rewards are +1, so verify advantages vanish inside every
    // group and only solve parameters receive gradient (beta = 0).
    SyntheticPolicy policy({0.0}, {25.0}, {25.0});
    ProblemSet problems = generate_problems(6, 1, 4, {}, 19);
    RolloutBatch batch = sample_rollouts(policy, problems, {0, 1, 2, 3, 4, 5}, 4, 4, 3);
    auto advantages = batch_action_advantages(batch, problems, policy, 0.0);
    for (std::size_t ri = 0; ri < batch.rollouts.size(); ++ri)
        for (std::size_t si = 0; si < batch.rollouts[ri].samples.size(); ++si) {
            const auto& traj = batch.rollouts[ri].samples[si].trajectory;
            for (std::size_t ai = 0; ai < traj.actions.size(); ++ai)
                if (traj.actions[ai].kind == ActionType::Verify)
                    CHECK(advantages[ri][si][ai] == 0.0);
        }
    LossGrad loss = process_surrogate_loss(batch, problems, policy, policy, policy, 0.2, 0.0);
    CHECK(loss.grad[policy.tp_param(0)] == 0.0);
    CHECK(loss.grad[policy.tn_param(0)] == 0.0);
}

TEST_CASE("process train steps are deterministic") {
    SyntheticPolicy policy = SyntheticPolicy::constant(1, 0.2, 0.1, 0.3);
    ProblemSet problems = generate_problems(12, 1, 4, {}, 23);
    OnlineRlConfig config;
    config.batch_size = 6;
    config.learning_rate = 0.05;

    auto run = [&]() {
        RlTrainState state{policy, policy, 0};
        std::vector<double> rewards;
        for (int step = 0; step < 4; ++step) {
            StepReport report = process_train_step(
                state, problems, batch_problem_indices(problems.size(), 6, step), config,
                derive_seed(9, step));
            rewards.push_back(report.mean_reward);
        }
        return std::make_pair(state.policy, rewards);
    };
    auto [pa, ra] = run();
    auto [pb, rb] = run();
    CHECK(pa == pb);
    CHECK(ra == rb);
}
