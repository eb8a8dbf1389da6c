#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "process.hpp"
#include "training.hpp"

namespace svrl {

// Offline RL pipeline: one sampling pass per iteration, then prompt
// filtering, rejection sampling, accuracy binning, accuracy-grouped
// baselines, and clipped-surrogate updates against a reference policy that
// stays fixed for the whole run.

enum class OfflineBaselineMode {
    PositionGroup,       // accuracy bin x step index
    RewardContextGroup,  // accuracy bin x reward context
    PlainRewardContext,  // reward context only, bins ignored
};

std::string_view offline_baseline_mode_name(OfflineBaselineMode mode);
OfflineBaselineMode offline_baseline_mode_from_name(std::string_view name);

struct OfflineConfig {
    double filter_lo = 0.1;  // closed interval, both ends retained
    double filter_hi = 0.7;
    int samples_per_prompt = 8;
    int max_actions = 20;
    std::size_t batch_size = 64;
    double learning_rate = 5e-7;
    double kl_coefficient = 0.1;
    double clip_range = 0.2;
    int warmup_steps = 5;  // learning rate ramps linearly from zero
    double bin_width = 0.1;
    int max_rounds = 4;
    int epochs = 1;  // passes over the store per iteration
    OfflineBaselineMode baseline_mode = OfflineBaselineMode::PositionGroup;
};

// One sampled trajectory in the offline store, with everything the update
// needs precomputed under the sampling policy.
struct OfflineEntry {
    std::string problem_id;
    std::size_t problem_index = 0;
    int bin = 0;  // accuracy bin
    SampledTrajectory sample;
    std::vector<int> action_rewards;  // 0 for the end marker
};

struct AccuracyBin {
    int index = 0;
    double lo = 0.0;  // [lo, hi); the top bin is closed at 1
    double hi = 0.0;
    std::vector<std::string> problem_ids;
    std::vector<std::size_t> entry_indices;  // into the store
};

struct OfflineStore {
    std::vector<OfflineEntry> entries;
    std::map<std::string, double> problem_accuracy;  // before filtering
    std::vector<AccuracyBin> bins;
    std::map<std::string, int> rejection_counts;  // reason name -> count
    int filtered_prompts = 0;
};

// Ids whose accuracy lies in [lo, hi], both ends inclusive.
std::vector<std::string> filter_prompts(const std::map<std::string, double>& accuracies,
                                        double lo, double hi);

// Batch-wide rejection sampling: drops trajectories failing
// validate_trajectory and counts the reasons by name.
struct RejectionReport {
    std::map<std::string, int> counts;
    int total() const;
};
std::vector<Trajectory> reject_offline(const std::vector<Trajectory>& batch,
                                       const ProblemSet& problems, int max_actions,
                                       RejectionReport& report);

// Partitions problems into uniform-width accuracy bins (entry lists empty);
// only bins with members are returned, ordered by index.
std::vector<AccuracyBin> bin_by_accuracy(const ProblemSet& problems,
                                         const std::map<std::string, double>& accuracies,
                                         double bin_width);

// Accuracy-bin index under uniform bins of the given width; accuracy 1 lands
// in the top bin. Throws unless the width divides [0,1] evenly.
int accuracy_bin_index(double accuracy, double bin_width);

// Mean reward of all actions taken at step_index (0-based) across the bin's
// trajectories. Throws when no trajectory reaches that index.
double baseline_position(const OfflineStore& store, const AccuracyBin& bin,
                         std::size_t step_index);

// Mean reward of the bin's actions sharing the reward context exactly.
// Throws when the sub-group is empty.
double baseline_accuracy_context(const OfflineStore& store, const AccuracyBin& bin,
                                 const RewardContext& context, const ProblemSet& problems);

// Sampling pass: samples_per_prompt trajectories per problem under `policy`,
// accuracy estimated from those same samples, prompts filtered to the
// configured range, invalid trajectories rejected (alternation, length,
// confirmed-continue, missing termination), survivors binned by accuracy.
// Throws Error(Data) when nothing survives.
OfflineStore build_offline_store(const SyntheticPolicy& policy, const ProblemSet& problems,
                                 const OfflineConfig& config, std::uint64_t seed);

enum class OfflineMode { Outcome, Process };

struct OfflineTrainState {
    SyntheticPolicy policy;
    SyntheticPolicy reference;      // fixed for the whole run
    SyntheticPolicy sampling;       // policy that produced the current store
    int step = 0;                   // global update counter (drives warmup)
};

struct OfflineStepReport {
    int step = 0;
    double loss = 0.0;
    double learning_rate = 0.0;  // after warmup scaling
    double mean_reward = 0.0;
    double mean_advantage = 0.0;
    double clip_fraction = 0.0;
    double kl = 0.0;        // mean trajectory log-ratio vs the fixed reference
    double accuracy = 0.0;  // minibatch final-answer accuracy
    std::map<int, double> bin_mean_return;
};

// One minibatch update over store entries [begin, end). Outcome mode applies
// the whole-trajectory clipped surrogate with the accuracy-grouped return
// baseline; process mode applies the per-action surrogate with the
// configured baseline estimator. Baselines are computed over the full store.
OfflineStepReport offline_train_step(OfflineTrainState& state, const OfflineStore& store,
                                     std::size_t begin, std::size_t end,
                                     const ProblemSet& problems, const OfflineConfig& config,
                                     OfflineMode mode);

struct OfflineIterationReport {
    std::vector<OfflineStepReport> steps;
    OfflineStore store;
};

// One full offline iteration: resample the store from the current policy,
// then run the configured epochs of minibatch updates.
OfflineIterationReport offline_iteration(OfflineTrainState& state, const ProblemSet& problems,
                                         const OfflineConfig& config, OfflineMode mode,
                                         std::uint64_t seed);

}  // namespace svrl
