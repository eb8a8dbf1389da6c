#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sft.hpp"  // LossGrad
#include "training.hpp"

namespace svrl {

// Outcome-level REINFORCE Leave-One-Out. Whole trajectories are the unit of
// credit: each sample's baseline is the mean outcome reward of the other M-1
// samples for the same problem, the advantage subtracts a KL log-ratio
// against a fixed reference policy, and the update minimizes a clipped
// surrogate over whole-trajectory probability ratios.

struct RlooGroup {
    std::string problem_id;
    std::size_t problem_index = 0;
    std::vector<SampledTrajectory> trajectories;  // M >= 2
    std::vector<int> rewards;                     // outcome rewards, +1/-1
    std::vector<double> logp_old;                 // under the sampling policy
    std::vector<double> logp_ref;                 // under the fixed reference
};

struct AdvantageRecord {
    std::size_t sample_index = 0;
    double advantage = 0.0;  // reward - baseline - kl_term, exactly
    double baseline = 0.0;
    double kl_term = 0.0;
};

// Leave-one-out means: baselines[m] = mean of rewards[j], j != m. Throws
// below two samples.
std::vector<double> loo_baselines(const std::vector<int>& rewards);

// A(x,y) = R_o - loo baseline - beta * (logp_old - logp_ref).
std::vector<AdvantageRecord> outcome_advantages(const RlooGroup& group, double beta);

// Builds RLOO groups from a rollout batch; rewards and log-probs under both
// policies are filled in. When reject_invalid is set, trajectories failing
// validation are dropped first and groups left with fewer than two samples
// are discarded (the leave-one-out baseline needs M >= 2); dropped_groups
// counts them.
struct RlooBatch {
    std::vector<RlooGroup> groups;
    int dropped_groups = 0;
    int rejected_trajectories = 0;
};
RlooBatch build_rloo_batch(const RolloutBatch& rollouts, const ProblemSet& problems,
                           const SyntheticPolicy& reference, bool reject_invalid,
                           int max_actions);

// Clipped surrogate over whole-trajectory ratios r = exp(logp_theta -
// logp_theta_old):
//   L = -(1/N) sum min(r A, clip(r, 1-eps, 1+eps) A)
// with its analytic gradient in theta. Advantages are computed from the
// stored rewards and log-probs and are constant in theta.
LossGrad rloo_surrogate_loss(const std::vector<RlooGroup>& batch, const SyntheticPolicy& theta,
                             const SyntheticPolicy& theta_old, const ProblemSet& problems,
                             double epsilon, double beta);

struct OnlineRlConfig {
    int samples_per_problem = 4;  // M; also the per-prompt sample count n
    std::size_t batch_size = 64;
    double learning_rate = 5e-7;
    double beta = 0.05;     // KL coefficient
    double epsilon = 0.2;   // clip range
    int max_rounds = 4;
    int max_actions = 20;
    int updates_per_episode = 1;  // paper schedule uses n; default keeps one
    bool reject_invalid = false;
};

struct RlTrainState {
    SyntheticPolicy policy;
    SyntheticPolicy reference;  // fixed for the whole run
    int step = 0;
};

// One sampling episode: draw M trajectories per problem from the current
// policy, compute LOO advantages, and take updates_per_episode descent steps
// on the surrogate.
StepReport rloo_train_step(RlTrainState& state, const ProblemSet& problems,
                           const std::vector<std::size_t>& problem_indices,
                           const OnlineRlConfig& config, std::uint64_t seed);

}  // namespace svrl
