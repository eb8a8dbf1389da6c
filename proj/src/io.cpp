#include "io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace svrl {

std::string format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    // Prefer the shortest representation that round-trips.
    for (int precision = 1; precision < 17; ++precision) {
        char shorter[64];
        std::snprintf(shorter, sizeof(shorter), "%.*g", precision, value);
        if (std::strtod(shorter, nullptr) == value) return shorter;
    }
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << content;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

namespace {

// Applies fn to each nonempty line; rethrows parse failures with the line
// number attached.
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn&& fn) {
    const std::string content = read_file(path);
    std::size_t line_number = 0;
    std::size_t pos = 0;
    while (pos < content.size()) {
        std::size_t nl = content.find('\n', pos);
        if (nl == std::string::npos) nl = content.size();
        ++line_number;
        std::string_view line(content.data() + pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error(ErrorCode::Data,
                        path + ":" + std::to_string(line_number) + ": invalid JSON");
        try {
            fn(j);
        } catch (const Error& e) {
            throw Error(e.code(),
                        path + ":" + std::to_string(line_number) + ": " + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::Data,
                        path + ":" + std::to_string(line_number) + ": " + e.what());
        }
    }
}

}  // namespace

nlohmann::json problem_to_json(const ProblemSpec& problem) {
    return {{"id", problem.id},
            {"difficulty_bin", problem.difficulty_bin},
            {"golden_answer", token_text(problem.golden_answer)},
            {"alphabet_size", problem.alphabet_size}};
}

ProblemSpec problem_from_json(const nlohmann::json& j) {
    ProblemSpec p;
    p.id = j.at("id").get<std::string>();
    p.difficulty_bin = j.at("difficulty_bin").get<int>();
    p.golden_answer = token_from_text(j.at("golden_answer").get<std::string>());
    p.alphabet_size = j.at("alphabet_size").get<int>();
    return p;
}

void save_problems(const ProblemSet& problems, const std::string& path) {
    std::string out;
    for (const ProblemSpec& p : problems.items()) out += problem_to_json(p).dump() + "\n";
    write_file(path, out);
}

ProblemSet load_problems(const std::string& path) {
    std::vector<ProblemSpec> problems;
    for_each_jsonl_line(path, [&](const nlohmann::json& j) {
        problems.push_back(problem_from_json(j));
    });
    return ProblemSet(std::move(problems));
}

nlohmann::json trajectory_to_json(const Trajectory& traj) {
    nlohmann::json actions = nlohmann::json::array();
    for (const Action& a : traj.actions) {
        nlohmann::json entry;
        switch (a.kind) {
            case ActionType::Solve:
                entry["kind"] = "solve";
                entry["answer_token"] = token_text(*a.answer_token);
                break;
            case ActionType::Verify:
                entry["kind"] = "verify";
                entry["verdict_text"] = *a.verdict_text;
                break;
            case ActionType::End:
                entry["kind"] = "end";
                break;
        }
        actions.push_back(std::move(entry));
    }
    return {{"problem_id", traj.problem_id}, {"actions", std::move(actions)}};
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory traj;
    traj.problem_id = j.at("problem_id").get<std::string>();
    for (const nlohmann::json& entry : j.at("actions")) {
        const std::string kind = entry.at("kind").get<std::string>();
        if (kind == "solve")
            traj.actions.push_back(
                Action::solve(token_from_text(entry.at("answer_token").get<std::string>())));
        else if (kind == "verify")
            traj.actions.push_back(
                Action::verify_text(entry.at("verdict_text").get<std::string>()));
        else if (kind == "end")
            traj.actions.push_back(Action::end());
        else
            throw Error(ErrorCode::Data, "unknown action kind '" + kind + "'");
    }
    return traj;
}

void save_sft_dataset(const std::vector<SftExample>& dataset, const std::string& path) {
    std::string out;
    for (const SftExample& example : dataset) {
        nlohmann::json j = {{"trajectory", trajectory_to_json(example.trajectory)},
                            {"mask", example.mask}};
        out += j.dump() + "\n";
    }
    write_file(path, out);
}

std::vector<SftExample> load_sft_dataset(const std::string& path) {
    std::vector<SftExample> dataset;
    for_each_jsonl_line(path, [&](const nlohmann::json& j) {
        SftExample example;
        example.trajectory = trajectory_from_json(j.at("trajectory"));
        example.mask = j.at("mask").get<std::vector<bool>>();
        if (example.mask.size() != example.trajectory.actions.size())
            throw Error(ErrorCode::Data, "mask length does not match action count");
        dataset.push_back(std::move(example));
    });
    return dataset;
}

void save_policy(const SyntheticPolicy& policy, const std::string& path) {
    nlohmann::json j;
    char name[48];
    for (int bin = 0; bin < policy.num_bins(); ++bin) {
        std::snprintf(name, sizeof(name), "solve[%d]", bin);
        j[name] = policy.solve_logit(bin);
        std::snprintf(name, sizeof(name), "verify_tp[%d]", bin);
        j[name] = policy.verify_tp_logit(bin);
        std::snprintf(name, sizeof(name), "verify_tn[%d]", bin);
        j[name] = policy.verify_tn_logit(bin);
    }
    write_file(path, j.dump(2) + "\n");
}

SyntheticPolicy load_policy(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorCode::Data, path + ": invalid policy checkpoint");
    std::vector<double> solve, tp, tn;
    auto read_series = [&](const char* prefix, std::vector<double>& out) {
        for (int bin = 0;; ++bin) {
            char name[48];
            std::snprintf(name, sizeof(name), "%s[%d]", prefix, bin);
            auto it = j.find(name);
            if (it == j.end()) break;
            out.push_back(it->get<double>());
        }
    };
    read_series("solve", solve);
    read_series("verify_tp", tp);
    read_series("verify_tn", tn);
    if (solve.empty() || solve.size() != tp.size() || solve.size() != tn.size())
        throw Error(ErrorCode::Data, path + ": incomplete policy checkpoint");
    if (j.size() != solve.size() * 3)
        throw Error(ErrorCode::Data, path + ": unexpected keys in policy checkpoint");
    return SyntheticPolicy(std::move(solve), std::move(tp), std::move(tn));
}

void save_offline_store(const OfflineStore& store, const std::string& path) {
    std::string out;
    for (const OfflineEntry& entry : store.entries) {
        nlohmann::json logps = nlohmann::json::array();
        for (double v : entry.sample.action_logps) logps.push_back(v);
        nlohmann::json j = {{"problem_id", entry.problem_id},
                            {"bin", entry.bin},
                            {"trajectory", trajectory_to_json(entry.sample.trajectory)},
                            {"action_rewards", entry.action_rewards},
                            {"action_logps", std::move(logps)}};
        out += j.dump() + "\n";
    }
    write_file(path, out);
}

nlohmann::json offline_store_manifest(const OfflineStore& store) {
    nlohmann::json bins = nlohmann::json::array();
    for (const AccuracyBin& bin : store.bins) {
        bins.push_back({{"index", bin.index},
                        {"lo", bin.lo},
                        {"hi", bin.hi},
                        {"problems", bin.problem_ids},
                        {"trajectories", bin.entry_indices.size()}});
    }
    return {{"bins", std::move(bins)},
            {"rejections", store.rejection_counts},
            {"filtered_prompts", store.filtered_prompts},
            {"entries", store.entries.size()}};
}

void write_reward_dump(const std::vector<Trajectory>& batch, const ProblemSet& problems,
                       const std::string& path) {
    std::string out;
    for (const Trajectory& traj : batch) {
        const ProblemSpec& problem = problems.by_id(traj.problem_id);
        for (std::size_t i = 0; i < traj.actions.size(); ++i) {
            if (traj.actions[i].kind == ActionType::End) continue;
            nlohmann::json j = {{"problem_id", traj.problem_id},
                                {"action_index", i},
                                {"reward", action_reward(traj, i, problem)},
                                {"context", reward_context(traj, i, problem)}};
            out += j.dump() + "\n";
        }
    }
    write_file(path, out);
}

namespace {

nlohmann::json rate_to_json(const RateCount& rate) {
    nlohmann::json j = {{"numerator", rate.numerator}, {"denominator", rate.denominator}};
    if (auto value = rate.rate())
        j["rate"] = *value;
    else
        j["rate"] = nullptr;
    return j;
}

}  // namespace

nlohmann::json metrics_to_json(const MetricsReport& report) {
    nlohmann::json trials = nlohmann::json::object();
    for (const auto& [bin, value] : report.avg_trials_by_difficulty)
        trials[std::to_string(bin)] = value;
    nlohmann::json per_bin = nlohmann::json::object();
    for (const auto& [bin, count] : report.trajectories_by_difficulty)
        per_bin[std::to_string(bin)] = count;
    return {{"verification_accuracy", rate_to_json(report.verification_accuracy)},
            {"error_recall", rate_to_json(report.error_recall)},
            {"correct_precision", rate_to_json(report.correct_precision)},
            {"incorrect_to_correct_rate", rate_to_json(report.incorrect_to_correct)},
            {"correct_to_incorrect_rate", rate_to_json(report.correct_to_incorrect)},
            {"avg_trials_by_difficulty", std::move(trials)},
            {"trajectories_by_difficulty", std::move(per_bin)},
            {"trajectory_count", report.trajectory_count}};
}

std::string metrics_to_csv(const MetricsReport& report, const std::string& checkpoint,
                           const std::string& evalset) {
    std::string header = "checkpoint,evalset,trajectories";
    std::string row = checkpoint + "," + evalset + "," +
                      std::to_string(report.trajectory_count);
    auto add_rate = [&](const char* name, const RateCount& rate) {
        header += std::string(",") + name + "," + name + "_num," + name + "_den";
        row += ",";
        if (auto value = rate.rate()) row += format_double(*value);
        row += "," + std::to_string(rate.numerator) + "," + std::to_string(rate.denominator);
    };
    add_rate("va", report.verification_accuracy);
    add_rate("er", report.error_recall);
    add_rate("cp", report.correct_precision);
    add_rate("icr", report.incorrect_to_correct);
    add_rate("cir", report.correct_to_incorrect);
    for (const auto& [bin, value] : report.avg_trials_by_difficulty) {
        header += ",trials_bin" + std::to_string(bin);
        row += "," + format_double(value);
    }
    return header + "\n" + row + "\n";
}

CsvLog::CsvLog(std::string path, std::vector<std::string> columns)
    : path_(std::move(path)), column_count_(columns.size()) {
    std::string header;
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i) header += ",";
        header += columns[i];
    }
    write_file(path_, header + "\n");
}

void CsvLog::append_row(const std::vector<std::string>& values) {
    if (values.size() != column_count_)
        throw Error(ErrorCode::Internal, "CSV row width mismatch");
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_);
    std::string row;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) row += ",";
        row += values[i];
    }
    out << row << "\n";
}

}  // namespace svrl
