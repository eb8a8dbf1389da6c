#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "rloo.hpp"  // OnlineRlConfig, RlTrainState
#include "training.hpp"

namespace svrl {

// Process-level group-based RL. Every solve/verify action is a sub-process:
// its baseline is the mean reward of all batch actions sharing its reward
// context (actions holding the same information before acting), and the
// surrogate clips per-action probability ratios, normalized per trajectory
// by the action count so long and short trajectories weigh equally. End
// markers are deterministic and rewardless, so they are excluded from the
// groups, the loss sum, and the |y|_a normalization alike.

struct ContextMember {
    std::size_t rollout_index = 0;  // position in the flattened batch
    std::size_t sample_index = 0;
    std::size_t action_index = 0;
    int reward = 0;
};

struct ContextGroup {
    RewardContext key;
    std::vector<ContextMember> members;
};

// Exact partition of all solve/verify actions in the batch by reward-context
// equality, ordered by key for reproducibility.
std::vector<ContextGroup> group_by_reward_context(const RolloutBatch& batch,
                                                  const ProblemSet& problems);

// Mean reward of the group's members. Throws on an empty group.
double group_baseline(const ContextGroup& group);

// A(a_t) = R_a - group baseline - beta * (logp_old(a_t) - logp_ref(a_t)),
// with the log-ratio taken per action. Singleton groups put the baseline at
// the member's own reward, so the advantage is exactly the KL term.
double action_advantage(const ContextMember& member, const ContextGroup& group, double beta,
                        double logp_old, double logp_ref);

// Per-action advantages for the whole batch, indexed like the rollouts:
// advantages[rollout][sample][action]; end markers hold 0.
std::vector<std::vector<std::vector<double>>> batch_action_advantages(
    const RolloutBatch& batch, const ProblemSet& problems, const SyntheticPolicy& reference,
    double beta);

// Clipped per-action surrogate:
//   L = -(1/N) sum_y (1/|y|_a) sum_{a in y} min(r_a A_a, clip(r_a) A_a)
// with r_a = exp(logp_theta(a) - logp_theta_old(a)) and the analytic
// gradient in theta.
LossGrad process_surrogate_loss(const RolloutBatch& batch, const ProblemSet& problems,
                                const SyntheticPolicy& theta, const SyntheticPolicy& theta_old,
                                const SyntheticPolicy& reference, double epsilon, double beta);

// One sampling episode of process-level training; mirrors rloo_train_step
// with per-action grouping, baselines, and loss.
StepReport process_train_step(RlTrainState& state, const ProblemSet& problems,
                              const std::vector<std::size_t>& problem_indices,
                              const OnlineRlConfig& config, std::uint64_t seed);

}  // namespace svrl
