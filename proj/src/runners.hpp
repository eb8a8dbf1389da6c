#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "io.hpp"
#include "metrics.hpp"
#include "offline.hpp"
#include "rloo.hpp"

namespace svrl {

// Run orchestration behind the CLI and the C API: full training loops with
// CSV logs and checkpoints, evaluation runs, and report merging. Every run
// is a pure function of (inputs, config, seed); logs and data files are
// byte-identical across reruns.

// Training modes: "sft", "rloo", "process", "offline-orl", "offline-prl".
// config is a flat JSON object; missing keys take the defaults below.
//   common        steps (500), checkpoint_every (100), max_rounds (4),
//                 max_actions (20)
//   sft           lr (5e-6), sft_path (required)
//   rloo/process  lr (5e-7), batch_size (64), samples_per_prompt (4),
//                 beta (0.05), clip (0.2), updates_per_episode (1),
//                 reject_invalid (false)
//   offline-*     lr (5e-7), batch_size (64), samples_per_prompt (8),
//                 beta (0.1), clip (0.2), warmup_steps (5), filter_lo (0.1),
//                 filter_hi (0.7), bin_width (0.1), epochs (1),
//                 iterations (1), baseline_mode ("position_group"),
//                 dump_store (true)
SyntheticPolicy run_train(const std::string& mode, const SyntheticPolicy& initial,
                          const ProblemSet& problems, const nlohmann::json& config,
                          std::uint64_t seed, const std::string& out_dir);

// The full default config for a training mode, as run_train resolves it.
nlohmann::json train_default_config(const std::string& mode);

// Samples n_samples trajectories per problem, computes the metric suite, and
// when out_dir is nonempty writes metrics.json and metrics.csv there.
MetricsReport run_eval(const SyntheticPolicy& policy, const ProblemSet& problems,
                       int n_samples, std::uint64_t seed, int max_rounds,
                       const std::string& out_dir, const std::string& checkpoint_label,
                       const std::string& evalset_label);

// Merges the metrics.csv of several run directories into one comparison CSV
// with a leading run column. All inputs must share the same header; a
// mismatch reports the offending column.
void merge_reports(const std::vector<std::string>& run_dirs, const std::string& out_csv);

}  // namespace svrl
