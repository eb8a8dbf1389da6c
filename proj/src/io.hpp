#pragma once

#include <string>
#include <vector>

#include "environment.hpp"
#include "metrics.hpp"
#include "offline.hpp"
#include "sft.hpp"

#include <json.hpp>

namespace svrl {

// File formats. All JSON emission goes through nlohmann::json with ordered
// keys and all floats through format_double, so identical inputs produce
// identical bytes.

std::string format_double(double value);  // shortest exact decimal (%.17g trimmed)

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Problem sets: one {"id", "difficulty_bin", "golden_answer", "alphabet_size"}
// object per line; golden answers in token text form ("A", "B", ...).
nlohmann::json problem_to_json(const ProblemSpec& problem);
ProblemSpec problem_from_json(const nlohmann::json& j);
void save_problems(const ProblemSet& problems, const std::string& path);
ProblemSet load_problems(const std::string& path);

// Trajectories: {"problem_id", "actions":[{"kind", "answer_token"?,
// "verdict_text"?}]}; verdicts are re-parsed from the text on load.
nlohmann::json trajectory_to_json(const Trajectory& traj);
Trajectory trajectory_from_json(const nlohmann::json& j);

// SFT datasets: one {"trajectory", "mask"} object per line plus a manifest.
void save_sft_dataset(const std::vector<SftExample>& dataset, const std::string& path);
std::vector<SftExample> load_sft_dataset(const std::string& path);

// Policy checkpoints: a flat JSON map from parameter name
// ("solve[3]", "verify_tp[0]", ...) to logit value.
void save_policy(const SyntheticPolicy& policy, const std::string& path);
SyntheticPolicy load_policy(const std::string& path);

// Offline trajectory store: {"problem_id", "bin", "trajectory",
// "action_rewards", "action_logps"} per line.
void save_offline_store(const OfflineStore& store, const std::string& path);
// Bin manifest: ranges, member problems, entry counts, rejection counts.
nlohmann::json offline_store_manifest(const OfflineStore& store);

// Per-action reward dump: {"problem_id", "action_index", "reward",
// "context"} per action per line.
void write_reward_dump(const std::vector<Trajectory>& batch, const ProblemSet& problems,
                       const std::string& path);

// Metrics report as JSON (absent rates become null) and as a flat CSV
// (header + one row; absent rates become empty cells).
nlohmann::json metrics_to_json(const MetricsReport& report);
std::string metrics_to_csv(const MetricsReport& report, const std::string& checkpoint,
                           const std::string& evalset);

// Minimal CSV writer for training logs; makes byte-identical reruns easy.
class CsvLog {
public:
    CsvLog(std::string path, std::vector<std::string> columns);
    void append_row(const std::vector<std::string>& values);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::size_t column_count_;
};

}  // namespace svrl
