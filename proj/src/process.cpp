#include "process.hpp"

#include <algorithm>
#include <cmath>

namespace svrl {

std::vector<ContextGroup> group_by_reward_context(const RolloutBatch& batch,
                                                  const ProblemSet& problems) {
    std::map<RewardContext, std::vector<ContextMember>> groups;
    for (std::size_t ri = 0; ri < batch.rollouts.size(); ++ri) {
        const ProblemRollout& rollout = batch.rollouts[ri];
        const ProblemSpec& problem = problems.at(rollout.problem_index);
        for (std::size_t si = 0; si < rollout.samples.size(); ++si) {
            const Trajectory& traj = rollout.samples[si].trajectory;
            RewardContext context;  // grows action by action
            for (std::size_t ai = 0; ai < traj.actions.size(); ++ai) {
                if (traj.actions[ai].kind == ActionType::End) break;
                const int reward = action_reward(traj, ai, problem);
                groups[context].push_back({ri, si, ai, reward});
                context.push_back(reward);
            }
        }
    }
    std::vector<ContextGroup> out;
    out.reserve(groups.size());
    for (auto& [key, members] : groups) out.push_back({key, std::move(members)});
    return out;
}

double group_baseline(const ContextGroup& group) {
    if (group.members.empty()) throw Error(ErrorCode::Usage, "empty reward-context group");
    double sum = 0.0;
    for (const ContextMember& member : group.members) sum += member.reward;
    return sum / static_cast<double>(group.members.size());
}

double action_advantage(const ContextMember& member, const ContextGroup& group, double beta,
                        double logp_old, double logp_ref) {
    if (!std::isfinite(logp_old) || !std::isfinite(logp_ref))
        throw Error(ErrorCode::Numeric, "non-finite action log-probability");
    return member.reward - group_baseline(group) - beta * (logp_old - logp_ref);
}

std::vector<std::vector<std::vector<double>>> batch_action_advantages(
    const RolloutBatch& batch, const ProblemSet& problems, const SyntheticPolicy& reference,
    double beta) {
    std::vector<std::vector<std::vector<double>>> advantages(batch.rollouts.size());
    for (std::size_t ri = 0; ri < batch.rollouts.size(); ++ri) {
        advantages[ri].resize(batch.rollouts[ri].samples.size());
        for (std::size_t si = 0; si < batch.rollouts[ri].samples.size(); ++si)
            advantages[ri][si].assign(
                batch.rollouts[ri].samples[si].trajectory.actions.size(), 0.0);
    }
    for (const ContextGroup& group : group_by_reward_context(batch, problems)) {
        const double baseline = group_baseline(group);
        for (const ContextMember& member : group.members) {
            const ProblemRollout& rollout = batch.rollouts[member.rollout_index];
            const ProblemSpec& problem = problems.at(rollout.problem_index);
            const SampledTrajectory& sample = rollout.samples[member.sample_index];
            const double logp_old = sample.action_logps[member.action_index];
            const double logp_ref = action_log_prob(reference, problem, sample.trajectory,
                                                    member.action_index);
            if (!std::isfinite(logp_old) || !std::isfinite(logp_ref))
                throw Error(ErrorCode::Numeric, "non-finite action log-probability");
            advantages[member.rollout_index][member.sample_index][member.action_index] =
                member.reward - baseline - beta * (logp_old - logp_ref);
        }
    }
    return advantages;
}

LossGrad process_surrogate_loss(const RolloutBatch& batch, const ProblemSet& problems,
                                const SyntheticPolicy& theta, const SyntheticPolicy& theta_old,
                                const SyntheticPolicy& reference, double epsilon, double beta) {
    if (epsilon <= 0.0) throw Error(ErrorCode::Usage, "clip range must be positive");
    std::size_t total = 0;
    for (const ProblemRollout& rollout : batch.rollouts) total += rollout.samples.size();
    if (total == 0) throw Error(ErrorCode::Usage, "empty process batch");

    const auto advantages = batch_action_advantages(batch, problems, reference, beta);

    LossGrad out;
    out.grad.assign(theta.param_count(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(total);
    for (std::size_t ri = 0; ri < batch.rollouts.size(); ++ri) {
        const ProblemRollout& rollout = batch.rollouts[ri];
        const ProblemSpec& problem = problems.at(rollout.problem_index);
        for (std::size_t si = 0; si < rollout.samples.size(); ++si) {
            const Trajectory& traj = rollout.samples[si].trajectory;
            int action_count = 0;  // |y|_a without the end marker
            for (const Action& a : traj.actions)
                if (a.kind != ActionType::End) ++action_count;
            if (action_count == 0) continue;
            const double traj_weight = inv_n / static_cast<double>(action_count);
            for (std::size_t ai = 0; ai < traj.actions.size(); ++ai) {
                if (traj.actions[ai].kind == ActionType::End) continue;
                const double adv = advantages[ri][si][ai];
                const double lp_theta = action_log_prob(theta, problem, traj, ai);
                const double lp_old = action_log_prob(theta_old, problem, traj, ai);
                const double ratio = std::exp(lp_theta - lp_old);
                const double unclipped = ratio * adv;
                const double clipped =
                    std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon) * adv;
                out.value -= traj_weight * std::min(unclipped, clipped);
                if (unclipped <= clipped)
                    accumulate_action_log_prob_grad(theta, problem, traj, ai, out.grad,
                                                    -traj_weight * ratio * adv);
            }
        }
    }
    if (!std::isfinite(out.value))
        throw Error(ErrorCode::Numeric, "non-finite process surrogate loss");
    return out;
}

StepReport process_train_step(RlTrainState& state, const ProblemSet& problems,
                              const std::vector<std::size_t>& problem_indices,
                              const OnlineRlConfig& config, std::uint64_t seed) {
    const SyntheticPolicy theta_old = state.policy;
    RolloutBatch batch =
        sample_rollouts(theta_old, problems, problem_indices, config.samples_per_problem,
                        config.max_rounds, seed);

    const auto advantages = batch_action_advantages(batch, problems, state.reference,
                                                    config.beta);

    StepReport report;
    report.step = state.step;
    for (const ContextGroup& group : group_by_reward_context(batch, problems))
        report.groups.push_back({group.key, group.members.size(), group_baseline(group)});
    double solve_adv = 0.0, verify_adv = 0.0;
    std::size_t solve_count = 0, verify_count = 0, traj_count = 0;
    for (std::size_t ri = 0; ri < batch.rollouts.size(); ++ri) {
        const ProblemRollout& rollout = batch.rollouts[ri];
        const ProblemSpec& problem = problems.at(rollout.problem_index);
        for (std::size_t si = 0; si < rollout.samples.size(); ++si) {
            const SampledTrajectory& sample = rollout.samples[si];
            report.mean_reward += outcome_reward(sample.trajectory, problem);
            report.accuracy +=
                outcome_reward(sample.trajectory, problem) > 0 ? 1.0 : 0.0;
            double lp_old = 0.0;
            for (double v : sample.action_logps) lp_old += v;
            report.kl += lp_old - trajectory_log_prob(state.reference, problem,
                                                      sample.trajectory);
            ++traj_count;
            for (std::size_t ai = 0; ai < sample.trajectory.actions.size(); ++ai) {
                switch (sample.trajectory.actions[ai].kind) {
                    case ActionType::Solve:
                        solve_adv += advantages[ri][si][ai];
                        ++solve_count;
                        break;
                    case ActionType::Verify:
                        verify_adv += advantages[ri][si][ai];
                        ++verify_count;
                        break;
                    case ActionType::End:
                        break;
                }
            }
        }
    }
    report.mean_reward /= static_cast<double>(traj_count);
    report.accuracy /= static_cast<double>(traj_count);
    report.kl /= static_cast<double>(traj_count);
    const std::size_t action_total = solve_count + verify_count;
    report.mean_advantage = action_total == 0 ? 0.0
                                              : (solve_adv + verify_adv) /
                                                    static_cast<double>(action_total);
    if (solve_count > 0)
        report.solve_advantage_mean = solve_adv / static_cast<double>(solve_count);
    if (verify_count > 0)
        report.verify_advantage_mean = verify_adv / static_cast<double>(verify_count);

    double clip_fraction = 0.0;
    for (int update = 0; update < config.updates_per_episode; ++update) {
        LossGrad loss = process_surrogate_loss(batch, problems, state.policy, theta_old,
                                               state.reference, config.epsilon, config.beta);
        apply_gradient_step(state.policy, loss.grad, config.learning_rate);
        std::size_t clipped = 0;
        for (const ProblemRollout& rollout : batch.rollouts) {
            const ProblemSpec& problem = problems.at(rollout.problem_index);
            for (const SampledTrajectory& sample : rollout.samples) {
                for (std::size_t ai = 0; ai < sample.trajectory.actions.size(); ++ai) {
                    if (sample.trajectory.actions[ai].kind == ActionType::End) continue;
                    const double ratio = std::exp(
                        action_log_prob(state.policy, problem, sample.trajectory, ai) -
                        action_log_prob(theta_old, problem, sample.trajectory, ai));
                    if (ratio < 1.0 - config.epsilon || ratio > 1.0 + config.epsilon)
                        ++clipped;
                }
            }
        }
        clip_fraction = action_total == 0
                            ? 0.0
                            : static_cast<double>(clipped) / static_cast<double>(action_total);
    }
    report.clip_fraction = clip_fraction;
    ++state.step;
    return report;
}

}  // namespace svrl
