#include "rloo.hpp"

#include <algorithm>
#include <cmath>

namespace svrl {

std::vector<double> loo_baselines(const std::vector<int>& rewards) {
    const std::size_t m = rewards.size();
    if (m < 2)
        throw Error(ErrorCode::Usage, "leave-one-out requires at least two samples");
    double sum = 0.0;
    for (int r : rewards) sum += r;
    std::vector<double> baselines(m);
    for (std::size_t i = 0; i < m; ++i)
        baselines[i] = (sum - rewards[i]) / static_cast<double>(m - 1);
    return baselines;
}

std::vector<AdvantageRecord> outcome_advantages(const RlooGroup& group, double beta) {
    if (group.trajectories.size() != group.rewards.size() ||
        group.rewards.size() != group.logp_old.size() ||
        group.rewards.size() != group.logp_ref.size())
        throw Error(ErrorCode::Usage, "inconsistent group arrays");
    std::vector<double> baselines = loo_baselines(group.rewards);
    std::vector<AdvantageRecord> records;
    records.reserve(group.rewards.size());
    for (std::size_t m = 0; m < group.rewards.size(); ++m) {
        if (!std::isfinite(group.logp_old[m]) || !std::isfinite(group.logp_ref[m]))
            throw Error(ErrorCode::Numeric, "non-finite trajectory log-probability");
        AdvantageRecord rec;
        rec.sample_index = m;
        rec.baseline = baselines[m];
        rec.kl_term = beta * (group.logp_old[m] - group.logp_ref[m]);
        rec.advantage = group.rewards[m] - rec.baseline - rec.kl_term;
        records.push_back(rec);
    }
    return records;
}

RlooBatch build_rloo_batch(const RolloutBatch& rollouts, const ProblemSet& problems,
                           const SyntheticPolicy& reference, bool reject_invalid,
                           int max_actions) {
    RlooBatch batch;
    for (const ProblemRollout& rollout : rollouts.rollouts) {
        const ProblemSpec& problem = problems.at(rollout.problem_index);
        RlooGroup group;
        group.problem_id = problem.id;
        group.problem_index = rollout.problem_index;
        for (const SampledTrajectory& sample : rollout.samples) {
            if (reject_invalid &&
                !validate_trajectory(sample.trajectory, max_actions, problem.golden_answer)
                     .accepted()) {
                ++batch.rejected_trajectories;
                continue;
            }
            group.trajectories.push_back(sample);
            group.rewards.push_back(outcome_reward(sample.trajectory, problem));
            double lp_old = 0.0;
            for (double v : sample.action_logps) lp_old += v;
            group.logp_old.push_back(lp_old);
            group.logp_ref.push_back(
                trajectory_log_prob(reference, problem, sample.trajectory));
        }
        if (group.trajectories.size() < 2) {
            ++batch.dropped_groups;  // leave-one-out undefined
            continue;
        }
        batch.groups.push_back(std::move(group));
    }
    return batch;
}

LossGrad rloo_surrogate_loss(const std::vector<RlooGroup>& batch, const SyntheticPolicy& theta,
                             const SyntheticPolicy& theta_old, const ProblemSet& problems,
                             double epsilon, double beta) {
    if (epsilon <= 0.0) throw Error(ErrorCode::Usage, "clip range must be positive");
    LossGrad out;
    out.grad.assign(theta.param_count(), 0.0);
    std::size_t total = 0;
    for (const RlooGroup& group : batch) total += group.trajectories.size();
    if (total == 0) throw Error(ErrorCode::Usage, "empty RLOO batch");
    const double inv_n = 1.0 / static_cast<double>(total);

    for (const RlooGroup& group : batch) {
        const ProblemSpec& problem = problems.at(group.problem_index);
        std::vector<AdvantageRecord> advantages = outcome_advantages(group, beta);
        for (std::size_t m = 0; m < group.trajectories.size(); ++m) {
            const Trajectory& traj = group.trajectories[m].trajectory;
            const double lp_theta = trajectory_log_prob(theta, problem, traj);
            const double lp_old = trajectory_log_prob(theta_old, problem, traj);
            const double ratio = std::exp(lp_theta - lp_old);
            const double adv = advantages[m].advantage;
            const double unclipped = ratio * adv;
            const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv;
            out.value -= inv_n * std::min(unclipped, clipped);
            // Subgradient: the clipped branch is constant in theta; ties go
            // to the unclipped branch.
            if (unclipped <= clipped)
                accumulate_trajectory_log_prob_grad(theta, problem, traj, out.grad,
                                                    -inv_n * ratio * adv);
        }
    }
    if (!std::isfinite(out.value))
        throw Error(ErrorCode::Numeric, "non-finite RLOO surrogate loss");
    return out;
}

StepReport rloo_train_step(RlTrainState& state, const ProblemSet& problems,
                           const std::vector<std::size_t>& problem_indices,
                           const OnlineRlConfig& config, std::uint64_t seed) {
    const SyntheticPolicy theta_old = state.policy;
    RolloutBatch rollouts =
        sample_rollouts(theta_old, problems, problem_indices, config.samples_per_problem,
                        config.max_rounds, seed);
    RlooBatch batch = build_rloo_batch(rollouts, problems, state.reference,
                                       config.reject_invalid, config.max_actions);
    if (batch.groups.empty())
        throw Error(ErrorCode::Data, "no trainable groups in the batch");

    StepReport report;
    report.step = state.step;
    std::size_t count = 0;
    for (const RlooGroup& group : batch.groups) {
        std::vector<AdvantageRecord> advantages = outcome_advantages(group, config.beta);
        for (std::size_t m = 0; m < group.rewards.size(); ++m) {
            report.mean_reward += group.rewards[m];
            report.mean_advantage += advantages[m].advantage;
            report.accuracy += group.rewards[m] > 0 ? 1.0 : 0.0;
            report.kl += group.logp_old[m] - group.logp_ref[m];
            ++count;
        }
    }
    report.mean_reward /= static_cast<double>(count);
    report.mean_advantage /= static_cast<double>(count);
    report.accuracy /= static_cast<double>(count);
    report.kl /= static_cast<double>(count);

    double clipped_trajectories = 0.0;
    for (int update = 0; update < config.updates_per_episode; ++update) {
        LossGrad loss = rloo_surrogate_loss(batch.groups, state.policy, theta_old, problems,
                                            config.epsilon, config.beta);
        apply_gradient_step(state.policy, loss.grad, config.learning_rate);
        // Clip fraction after the update, against the frozen sampling policy.
        std::size_t clipped = 0;
        for (const RlooGroup& group : batch.groups) {
            const ProblemSpec& problem = problems.at(group.problem_index);
            for (const SampledTrajectory& sample : group.trajectories) {
                const double ratio =
                    std::exp(trajectory_log_prob(state.policy, problem, sample.trajectory) -
                             trajectory_log_prob(theta_old, problem, sample.trajectory));
                if (ratio < 1.0 - config.epsilon || ratio > 1.0 + config.epsilon) ++clipped;
            }
        }
        clipped_trajectories = static_cast<double>(clipped) / static_cast<double>(count);
    }
    report.clip_fraction = clipped_trajectories;
    ++state.step;
    return report;
}

}  // namespace svrl
