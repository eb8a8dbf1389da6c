#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "environment.hpp"
#include "trajectory.hpp"

namespace svrl {

// Behavior-initialization data construction and the masked SFT objective.
//
// An SFT example is a trial-and-error trajectory whose failed attempts come
// from the policy's own samples, assembled so that the final solve is
// golden-correct, every verification agrees with the actual correctness of
// its solve, and all answers are pairwise distinct. The loss mask selects all
// verifications, the final solve, and the end marker.

struct SftExample {
    Trajectory trajectory;
    std::vector<bool> mask;  // one entry per action

    bool operator==(const SftExample&) const = default;
};

struct DifficultyBucket {
    double lo = 0.0;  // half-open [lo, hi); the bucket with hi == 1 is closed
    double hi = 1.0;
    int rounds = 1;
};

// Quartile buckets: [0.75,1] -> 1 round, [0.5,0.75) -> 2, [0.25,0.5) -> 3,
// [0,0.25) -> 4. Harder problems get more trial-and-error rounds.
std::vector<DifficultyBucket> default_buckets();

// Throws Error(Usage) unless the buckets partition [0,1].
void check_buckets(const std::vector<DifficultyBucket>& buckets);

// Rounds of the unique bucket containing the accuracy.
int bucket_rounds(double accuracy, const std::vector<DifficultyBucket>& buckets);

// The SFT loss mask: true for verifications, the final solve, and the end
// marker.
std::vector<bool> sft_mask(const Trajectory& traj);

// Interleaves k-1 failed solves, a final correct solve, and k verifications
// into (s_1, v_1, ..., s_k, v_k, <end>) with the loss mask attached.
// Preconditions: failed solves are golden-incorrect with the first k-1
// verdicts incorrect, the final solve is golden-correct with a correct final
// verdict, and all answer tokens are distinct.
SftExample assemble_sft_example(const std::vector<Action>& failed_solves,
                                const Action& final_solve,
                                const std::vector<Action>& verifications,
                                const ProblemSpec& problem);

struct SftBuildOptions {
    int samples_per_problem = 5;
    int retry_budget = 50;  // extra solve draws allowed to find a correct attempt
    std::vector<DifficultyBucket> buckets = default_buckets();
};

struct SftBuildResult {
    std::vector<SftExample> examples;
    // Per-problem accuracy estimate from the initial samples, recorded for
    // every problem whether or not it yields an example.
    std::map<std::string, double> estimated_accuracy;
    int skipped_no_correct = 0;      // retry budget exhausted without a golden answer
    int skipped_small_alphabet = 0;  // alphabet too small for k distinct answers
};

// Builds the SFT dataset: per problem, estimates accuracy from
// samples_per_problem solve attempts, picks the round count from the
// buckets, and assembles one example from the problem's own failed attempts
// (resampling wrong answers when distinctness requires it) plus a correct
// attempt. Problems that defeat the retry budget are skipped and counted.
SftBuildResult build_sft_dataset(const SyntheticPolicy& policy, const ProblemSet& problems,
                                 const SftBuildOptions& options, std::uint64_t seed);

struct LossGrad {
    double value = 0.0;
    std::vector<double> grad;  // same layout as SyntheticPolicy::to_params()
};

// Masked negative log-likelihood, averaged over examples:
//   -(1/N) sum_examples sum_t mask(a_t) log pi(a_t | x, y_{:a_t})
// with the closed-form gradient in the policy logits. Throws on an empty
// dataset.
LossGrad sft_loss(const SyntheticPolicy& policy, const std::vector<SftExample>& dataset,
                  const ProblemSet& problems);

}  // namespace svrl
