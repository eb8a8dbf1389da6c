#include "runners.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

namespace svrl {

namespace {

namespace fs = std::filesystem;

template <typename T>
T config_get(const nlohmann::json& config, const char* key, T fallback) {
    auto it = config.find(key);
    if (it == config.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorCode::Usage, std::string("config key '") + key + "' has the wrong type");
    }
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create directory " + dir);
}

std::string checkpoint_path(const std::string& out_dir, int step) {
    char name[48];
    std::snprintf(name, sizeof(name), "policy_step_%06d.json", step);
    return out_dir + "/checkpoints/" + name;
}

void maybe_checkpoint(const SyntheticPolicy& policy, const std::string& out_dir, int step,
                      int every) {
    if (every > 0 && step % every == 0) {
        ensure_dir(out_dir + "/checkpoints");
        save_policy(policy, checkpoint_path(out_dir, step));
    }
}

SyntheticPolicy run_sft(const SyntheticPolicy& initial, const ProblemSet& problems,
                        const nlohmann::json& config, const std::string& out_dir) {
    const std::string sft_path = config_get<std::string>(config, "sft_path", "");
    if (sft_path.empty())
        throw Error(ErrorCode::Usage, "sft mode requires config key 'sft_path'");
    const std::vector<SftExample> dataset = load_sft_dataset(sft_path);
    const int steps = config_get<int>(config, "steps", 500);
    const double lr = config_get<double>(config, "lr", 5e-6);
    const int checkpoint_every = config_get<int>(config, "checkpoint_every", 100);

    CsvLog log(out_dir + "/train_log.csv", {"step", "loss"});
    SyntheticPolicy policy = initial;
    for (int step = 0; step < steps; ++step) {
        LossGrad loss = sft_loss(policy, dataset, problems);
        log.append_row({std::to_string(step), format_double(loss.value)});
        apply_gradient_step(policy, loss.grad, lr);
        maybe_checkpoint(policy, out_dir, step + 1, checkpoint_every);
    }
    return policy;
}

OnlineRlConfig online_config(const nlohmann::json& config) {
    OnlineRlConfig cfg;
    cfg.samples_per_problem = config_get<int>(config, "samples_per_prompt", 4);
    cfg.batch_size = config_get<std::size_t>(config, "batch_size", 64);
    cfg.learning_rate = config_get<double>(config, "lr", 5e-7);
    cfg.beta = config_get<double>(config, "beta", 0.05);
    cfg.epsilon = config_get<double>(config, "clip", 0.2);
    cfg.max_rounds = config_get<int>(config, "max_rounds", 4);
    cfg.max_actions = config_get<int>(config, "max_actions", 20);
    cfg.updates_per_episode = config_get<int>(config, "updates_per_episode", 1);
    cfg.reject_invalid = config_get<bool>(config, "reject_invalid", false);
    return cfg;
}

SyntheticPolicy run_online(const std::string& mode, const SyntheticPolicy& initial,
                           const ProblemSet& problems, const nlohmann::json& config,
                           std::uint64_t seed, const std::string& out_dir) {
    const OnlineRlConfig cfg = online_config(config);
    const int steps = config_get<int>(config, "steps", 500);
    const int checkpoint_every = config_get<int>(config, "checkpoint_every", 100);
    const bool process_mode = mode == "process";
    const bool dump_groups = process_mode && config_get<bool>(config, "dump_groups", false);
    std::string groups_dump;

    std::vector<std::string> columns = {"step",          "mean_reward", "mean_advantage",
                                        "clip_fraction", "kl",          "accuracy"};
    if (process_mode) {
        columns.push_back("solve_advantage_mean");
        columns.push_back("verify_advantage_mean");
    }
    CsvLog log(out_dir + "/train_log.csv", columns);

    RlTrainState state{initial, initial, 0};
    for (int step = 0; step < steps; ++step) {
        const auto indices =
            batch_problem_indices(problems.size(), cfg.batch_size, step);
        const std::uint64_t step_seed = derive_seed(seed, static_cast<std::uint64_t>(step));
        StepReport report =
            process_mode ? process_train_step(state, problems, indices, cfg, step_seed)
                         : rloo_train_step(state, problems, indices, cfg, step_seed);
        std::vector<std::string> row = {std::to_string(report.step),
                                        format_double(report.mean_reward),
                                        format_double(report.mean_advantage),
                                        format_double(report.clip_fraction),
                                        format_double(report.kl),
                                        format_double(report.accuracy)};
        if (process_mode) {
            row.push_back(report.solve_advantage_mean ? format_double(*report.solve_advantage_mean)
                                                      : "");
            row.push_back(report.verify_advantage_mean
                              ? format_double(*report.verify_advantage_mean)
                              : "");
        }
        log.append_row(row);
        if (dump_groups) {
            for (const GroupStat& group : report.groups) {
                nlohmann::json j = {{"step", report.step},
                                    {"context_key", group.context},
                                    {"group_size", group.size},
                                    {"baseline", group.baseline}};
                groups_dump += j.dump() + "\n";
            }
        }
        maybe_checkpoint(state.policy, out_dir, step + 1, checkpoint_every);
    }
    if (dump_groups) write_file(out_dir + "/groups.jsonl", groups_dump);
    return state.policy;
}

OfflineConfig offline_config(const nlohmann::json& config) {
    OfflineConfig cfg;
    cfg.filter_lo = config_get<double>(config, "filter_lo", cfg.filter_lo);
    cfg.filter_hi = config_get<double>(config, "filter_hi", cfg.filter_hi);
    cfg.samples_per_prompt = config_get<int>(config, "samples_per_prompt", cfg.samples_per_prompt);
    cfg.max_actions = config_get<int>(config, "max_actions", cfg.max_actions);
    cfg.batch_size = config_get<std::size_t>(config, "batch_size", cfg.batch_size);
    cfg.learning_rate = config_get<double>(config, "lr", cfg.learning_rate);
    cfg.kl_coefficient = config_get<double>(config, "beta", cfg.kl_coefficient);
    cfg.clip_range = config_get<double>(config, "clip", cfg.clip_range);
    cfg.warmup_steps = config_get<int>(config, "warmup_steps", cfg.warmup_steps);
    cfg.bin_width = config_get<double>(config, "bin_width", cfg.bin_width);
    cfg.max_rounds = config_get<int>(config, "max_rounds", cfg.max_rounds);
    cfg.epochs = config_get<int>(config, "epochs", cfg.epochs);
    cfg.baseline_mode = offline_baseline_mode_from_name(
        config_get<std::string>(config, "baseline_mode", "position_group"));
    return cfg;
}

SyntheticPolicy run_offline(const std::string& mode, const SyntheticPolicy& initial,
                            const ProblemSet& problems, const nlohmann::json& config,
                            std::uint64_t seed, const std::string& out_dir) {
    const OfflineConfig cfg = offline_config(config);
    const int iterations = config_get<int>(config, "iterations", 1);
    const bool dump_store = config_get<bool>(config, "dump_store", true);
    const OfflineMode offline_mode =
        mode == "offline-orl" ? OfflineMode::Outcome : OfflineMode::Process;

    CsvLog log(out_dir + "/train_log.csv",
               {"step", "mean_reward", "mean_advantage", "clip_fraction", "kl", "accuracy",
                "baseline_mode"});
    const std::string mode_name(offline_baseline_mode_name(cfg.baseline_mode));

    OfflineTrainState state{initial, initial, initial, 0};
    for (int iteration = 0; iteration < iterations; ++iteration) {
        OfflineIterationReport report = offline_iteration(
            state, problems, cfg, offline_mode,
            derive_seed(seed, static_cast<std::uint64_t>(iteration)));
        for (const OfflineStepReport& step : report.steps) {
            log.append_row({std::to_string(step.step), format_double(step.mean_reward),
                            format_double(step.mean_advantage),
                            format_double(step.clip_fraction), format_double(step.kl),
                            format_double(step.accuracy), mode_name});
        }
        if (dump_store) {
            char name[48];
            std::snprintf(name, sizeof(name), "store_iter_%03d.jsonl", iteration);
            save_offline_store(report.store, out_dir + "/" + name);
            std::snprintf(name, sizeof(name), "bins_iter_%03d.json", iteration);
            write_file(out_dir + "/" + name,
                       offline_store_manifest(report.store).dump(2) + "\n");
            std::vector<Trajectory> kept;
            kept.reserve(report.store.entries.size());
            for (const OfflineEntry& entry : report.store.entries)
                kept.push_back(entry.sample.trajectory);
            std::snprintf(name, sizeof(name), "rewards_iter_%03d.jsonl", iteration);
            write_reward_dump(kept, problems, out_dir + "/" + name);
        }
        save_policy(state.policy,
                    out_dir + "/policy_iter_" + std::to_string(iteration) + ".json");
    }
    return state.policy;
}

}  // namespace

nlohmann::json train_default_config(const std::string& mode) {
    nlohmann::json config = {{"steps", 500}, {"checkpoint_every", 100}, {"max_rounds", 4},
                             {"max_actions", 20}};
    if (mode == "sft") {
        config["lr"] = 5e-6;
        config["sft_path"] = "";
    } else if (mode == "rloo" || mode == "process") {
        config["lr"] = 5e-7;
        config["batch_size"] = 64;
        config["samples_per_prompt"] = 4;
        config["beta"] = 0.05;
        config["clip"] = 0.2;
        config["updates_per_episode"] = 1;
        config["reject_invalid"] = false;
    } else if (mode == "offline-orl" || mode == "offline-prl") {
        const OfflineConfig cfg;
        config.erase("steps");
        config["lr"] = cfg.learning_rate;
        config["batch_size"] = cfg.batch_size;
        config["samples_per_prompt"] = cfg.samples_per_prompt;
        config["beta"] = cfg.kl_coefficient;
        config["clip"] = cfg.clip_range;
        config["warmup_steps"] = cfg.warmup_steps;
        config["filter_lo"] = cfg.filter_lo;
        config["filter_hi"] = cfg.filter_hi;
        config["bin_width"] = cfg.bin_width;
        config["epochs"] = cfg.epochs;
        config["iterations"] = 1;
        config["baseline_mode"] = std::string(offline_baseline_mode_name(cfg.baseline_mode));
        config["dump_store"] = true;
    } else {
        throw Error(ErrorCode::Usage, "unknown training mode '" + mode + "'");
    }
    return config;
}

SyntheticPolicy run_train(const std::string& mode, const SyntheticPolicy& initial,
                          const ProblemSet& problems, const nlohmann::json& config,
                          std::uint64_t seed, const std::string& out_dir) {
    if (problems.empty()) throw Error(ErrorCode::Data, "empty problem set");
    ensure_dir(out_dir);
    SyntheticPolicy final_policy = initial;
    if (mode == "sft")
        final_policy = run_sft(initial, problems, config, out_dir);
    else if (mode == "rloo" || mode == "process")
        final_policy = run_online(mode, initial, problems, config, seed, out_dir);
    else if (mode == "offline-orl" || mode == "offline-prl")
        final_policy = run_offline(mode, initial, problems, config, seed, out_dir);
    else
        throw Error(ErrorCode::Usage, "unknown training mode '" + mode + "'");
    save_policy(final_policy, out_dir + "/policy_final.json");
    return final_policy;
}

MetricsReport run_eval(const SyntheticPolicy& policy, const ProblemSet& problems,
                       int n_samples, std::uint64_t seed, int max_rounds,
                       const std::string& out_dir, const std::string& checkpoint_label,
                       const std::string& evalset_label) {
    if (n_samples < 1) throw Error(ErrorCode::Usage, "n_samples must be >= 1");
    std::vector<Trajectory> evalset;
    evalset.reserve(problems.size() * n_samples);
    for (std::size_t pi = 0; pi < problems.size(); ++pi) {
        const ProblemSpec& problem = problems.at(pi);
        for (int m = 0; m < n_samples; ++m) {
            RandomSource rng(derive_seed(seed, pi, m));
            evalset.push_back(
                sample_trajectory(policy, problem, rng, max_rounds).trajectory);
        }
    }
    MetricsReport report = compute_metrics(evalset, problems);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_file(out_dir + "/metrics.json", metrics_to_json(report).dump(2) + "\n");
        write_file(out_dir + "/metrics.csv",
                   metrics_to_csv(report, checkpoint_label, evalset_label));
    }
    return report;
}

void merge_reports(const std::vector<std::string>& run_dirs, const std::string& out_csv) {
    if (run_dirs.empty()) throw Error(ErrorCode::Usage, "no run directories given");
    std::string header;
    std::string body;
    for (const std::string& dir : run_dirs) {
        const std::string content = read_file(dir + "/metrics.csv");
        const std::size_t nl = content.find('\n');
        if (nl == std::string::npos)
            throw Error(ErrorCode::Data, dir + "/metrics.csv: missing header");
        const std::string this_header = content.substr(0, nl);
        if (header.empty()) {
            header = this_header;
        } else if (this_header != header) {
            // Name the first column that disagrees.
            auto split = [](const std::string& line) {
                std::vector<std::string> out;
                std::size_t pos = 0;
                while (true) {
                    std::size_t comma = line.find(',', pos);
                    out.push_back(line.substr(pos, comma - pos));
                    if (comma == std::string::npos) break;
                    pos = comma + 1;
                }
                return out;
            };
            const std::vector<std::string> a = split(header);
            const std::vector<std::string> b = split(this_header);
            std::string column = "column count";
            for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i)
                if (a[i] != b[i]) {
                    column = a[i] + "' vs '" + b[i];
                    break;
                }
            throw Error(ErrorCode::Data, dir + "/metrics.csv: schema mismatch at column '" +
                                             column + "'");
        }
        std::size_t pos = nl + 1;
        while (pos < content.size()) {
            std::size_t end = content.find('\n', pos);
            if (end == std::string::npos) end = content.size();
            if (end > pos) body += dir + "," + content.substr(pos, end - pos) + "\n";
            pos = end + 1;
        }
    }
    write_file(out_csv, "run," + header + "\n" + body);
}

}  // namespace svrl
