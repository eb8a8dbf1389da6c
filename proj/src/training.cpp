#include "training.hpp"

#include <cmath>

namespace svrl {

RolloutBatch sample_rollouts(const SyntheticPolicy& policy, const ProblemSet& problems,
                             const std::vector<std::size_t>& problem_indices,
                             int samples_per_problem, int max_rounds, std::uint64_t seed) {
    RolloutBatch batch;
    batch.rollouts.reserve(problem_indices.size());
    for (std::size_t slot = 0; slot < problem_indices.size(); ++slot) {
        ProblemRollout rollout;
        rollout.problem_index = problem_indices[slot];
        const ProblemSpec& problem = problems.at(rollout.problem_index);
        for (int m = 0; m < samples_per_problem; ++m) {
            RandomSource rng(derive_seed(seed, slot, m));
            rollout.samples.push_back(sample_trajectory(policy, problem, rng, max_rounds));
        }
        batch.rollouts.push_back(std::move(rollout));
    }
    return batch;
}

void apply_gradient_step(SyntheticPolicy& policy, const std::vector<double>& grad, double lr) {
    std::vector<double> params = policy.to_params();
    if (grad.size() != params.size())
        throw Error(ErrorCode::Usage, "gradient size does not match parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!std::isfinite(grad[i])) throw Error(ErrorCode::Numeric, "non-finite gradient");
        params[i] -= lr * grad[i];
    }
    policy = SyntheticPolicy::from_params(params);
}

std::vector<std::size_t> batch_problem_indices(std::size_t problem_count,
                                               std::size_t batch_size, int step) {
    if (problem_count == 0) throw Error(ErrorCode::Usage, "empty problem set");
    std::vector<std::size_t> indices;
    indices.reserve(batch_size);
    std::size_t start = (static_cast<std::size_t>(step) * batch_size) % problem_count;
    for (std::size_t i = 0; i < batch_size; ++i)
        indices.push_back((start + i) % problem_count);
    return indices;
}

}  // namespace svrl
