#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "environment.hpp"
#include "rewards.hpp"

namespace svrl {

// Plumbing shared by the online and offline trainers: rollout batches,
// reports, and the plain gradient-descent update (kept adaptive-moment-free
// so gradients stay exactly checkable).

// All samples drawn for one problem in one episode.
struct ProblemRollout {
    std::size_t problem_index = 0;  // into the ProblemSet
    std::vector<SampledTrajectory> samples;
};

struct RolloutBatch {
    std::vector<ProblemRollout> rollouts;
};

// Samples M trajectories per listed problem from the policy. Sampling seeds
// derive from (seed, problem position, sample index), so results do not
// depend on traversal order.
RolloutBatch sample_rollouts(const SyntheticPolicy& policy, const ProblemSet& problems,
                             const std::vector<std::size_t>& problem_indices,
                             int samples_per_problem, int max_rounds, std::uint64_t seed);

struct GroupStat {
    RewardContext context;
    std::size_t size = 0;
    double baseline = 0.0;
};

struct StepReport {
    int step = 0;
    double mean_reward = 0.0;
    double mean_advantage = 0.0;
    double clip_fraction = 0.0;
    double kl = 0.0;        // mean log-ratio between sampling and reference policy
    double accuracy = 0.0;  // batch final-answer accuracy
    // Process-level extras; absent or empty for outcome-level training.
    std::optional<double> solve_advantage_mean;
    std::optional<double> verify_advantage_mean;
    std::vector<GroupStat> groups;  // per reward-context group of this step
};

// theta <- theta - lr * grad. Throws on non-finite gradients.
void apply_gradient_step(SyntheticPolicy& policy, const std::vector<double>& grad, double lr);

// Deterministic round-robin slice [step*batch_size, ...) over the problem
// set, wrapping around.
std::vector<std::size_t> batch_problem_indices(std::size_t problem_count,
                                               std::size_t batch_size, int step);

}  // namespace svrl
