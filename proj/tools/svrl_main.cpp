// svrl command line: dataset generation, training, evaluation, and report
// merging over the shared library's C interface.
//
// Exit codes: 0 success, 1 usage error, 2 data error (malformed or missing
// inputs), 3 numerical failure (non-finite loss).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "svrl/svrl.h"

namespace {

using nlohmann::json;

int exit_code(svrl_status status) {
    switch (status) {
        case SVRL_OK: return 0;
        case SVRL_ERR_USAGE: return 1;
        case SVRL_ERR_DATA:
        case SVRL_ERR_IO: return 2;
        case SVRL_ERR_NUMERIC:
        case SVRL_ERR_INTERNAL: return 3;
    }
    return 3;
}

[[noreturn]] void fail(svrl_status status) {
    std::fprintf(stderr, "error: %s\n", svrl_last_error());
    std::exit(exit_code(status));
}

void check(svrl_status status) {
    if (status != SVRL_OK) fail(status);
}

struct StringOut {
    char* value = nullptr;
    ~StringOut() { svrl_string_free(value); }
};

using ProblemsPtr = std::unique_ptr<svrl_problems, decltype(&svrl_problems_free)>;
using PolicyPtr = std::unique_ptr<svrl_policy, decltype(&svrl_policy_free)>;

ProblemsPtr load_problems_or_die(const std::string& path) {
    svrl_problems* problems = nullptr;
    check(svrl_problems_load(path.c_str(), &problems));
    return ProblemsPtr(problems, &svrl_problems_free);
}

PolicyPtr load_policy_or_die(const std::string& path) {
    svrl_policy* policy = nullptr;
    check(svrl_policy_load(path.c_str(), &policy));
    return PolicyPtr(policy, &svrl_policy_free);
}

// All logits zero: a maximally uncertain starting policy.
PolicyPtr default_policy(uint32_t num_bins) {
    std::vector<double> zeros(num_bins, 0.0);
    svrl_policy* policy = nullptr;
    check(svrl_policy_create(num_bins, zeros.data(), zeros.data(), zeros.data(), &policy));
    return PolicyPtr(policy, &svrl_policy_free);
}

uint32_t problems_num_bins(const std::string& problems_path) {
    // The resolved config needs the bin count before the policy exists;
    // scan the problem file for the maximum difficulty_bin.
    std::ifstream in(problems_path);
    if (!in) {
        std::fprintf(stderr, "error: cannot open %s\n", problems_path.c_str());
        std::exit(2);
    }
    int max_bin = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) continue;  // svrl_problems_load reports precisely
        if (auto it = j.find("difficulty_bin"); it != j.end() && it->is_number_integer())
            max_bin = std::max(max_bin, it->get<int>());
    }
    return static_cast<uint32_t>(max_bin + 1);
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "error: cannot open config %s\n", path.c_str());
        std::exit(1);
    }
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        std::fprintf(stderr, "error: %s: config must be a flat JSON object\n", path.c_str());
        std::exit(1);
    }
    return j;
}

void write_resolved_config(const std::string& out_dir, const json& config) {
    std::filesystem::create_directories(out_dir);
    std::ofstream out(out_dir + "/resolved_config.json", std::ios::binary | std::ios::trunc);
    if (!out) {
        std::fprintf(stderr, "error: cannot write %s/resolved_config.json\n", out_dir.c_str());
        std::exit(2);
    }
    out << config.dump(2) << "\n";
}

// flags > config file > defaults.
json resolve_config(const json& defaults, const json& file_config, const json& flag_config) {
    json resolved = defaults;
    for (const auto& [key, value] : file_config.items()) resolved[key] = value;
    for (const auto& [key, value] : flag_config.items()) resolved[key] = value;
    return resolved;
}

bool parse_filter_range(const std::string& text, double& lo, double& hi) {
    const std::size_t colon = text.find(':');
    if (colon == std::string::npos) return false;
    try {
        lo = std::stod(text.substr(0, colon));
        hi = std::stod(text.substr(colon + 1));
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic solve/verify/retry training framework"};
    app.require_subcommand(1);

    // Shared options; each subcommand registers the ones it honors.
    std::uint64_t seed = 0;
    std::string config_path, problems_path, out_dir;

    auto add_common = [&](CLI::App* cmd, bool needs_problems) {
        cmd->add_option("--seed", seed, "root random seed")->capture_default_str();
        cmd->add_option("--config", config_path, "flat JSON config file");
        cmd->add_option("--out", out_dir, "output directory")->required();
        if (needs_problems)
            cmd->add_option("--problems", problems_path, "problem set JSONL")->required();
    };

    // gen-problems
    auto* gen_problems = app.add_subcommand("gen-problems", "generate a synthetic problem set");
    std::uint64_t count = 100;
    std::uint32_t num_bins = 4;
    std::uint32_t alphabet_size = 8;
    std::vector<double> bin_weights;
    add_common(gen_problems, false);
    gen_problems->add_option("--count", count, "number of problems")->capture_default_str();
    gen_problems->add_option("--bins", num_bins, "number of difficulty bins")
        ->capture_default_str();
    gen_problems->add_option("--alphabet-size", alphabet_size, "answer alphabet size")
        ->capture_default_str();
    gen_problems->add_option("--bin-weights", bin_weights,
                             "relative bin weights (default uniform)");

    // gen-sft
    auto* gen_sft = app.add_subcommand("gen-sft", "build a behavior-initialization dataset");
    std::string policy_path;
    add_common(gen_sft, true);
    gen_sft->add_option("--policy", policy_path, "policy checkpoint JSON")->required();

    // train
    auto* train = app.add_subcommand("train", "run a training loop");
    std::string mode, sft_path, baseline_mode, filter_range;
    int steps = 0, samples_per_prompt = 0, max_rounds = 0;
    double lr = 0.0, beta = 0.0, clip = 0.0;
    add_common(train, true);
    train->add_option("--mode", mode, "sft | rloo | process | offline-orl | offline-prl")
        ->required();
    train->add_option("--policy", policy_path, "initial policy checkpoint (default: zero logits)");
    train->add_option("--sft", sft_path, "SFT dataset JSONL (mode sft)");
    auto* steps_opt = train->add_option("--steps", steps, "training steps");
    auto* lr_opt = train->add_option("--lr", lr, "learning rate");
    auto* beta_opt = train->add_option("--beta", beta, "KL coefficient");
    auto* clip_opt = train->add_option("--clip", clip, "clip range");
    auto* spp_opt =
        train->add_option("--samples-per-prompt", samples_per_prompt, "samples per prompt");
    auto* rounds_opt = train->add_option("--max-rounds", max_rounds, "sampling round cap");
    auto* filter_opt = train->add_option("--filter-range", filter_range,
                                         "offline prompt filter, lo:hi");
    auto* baseline_opt = train->add_option(
        "--baseline-mode", baseline_mode,
        "position_group | reward_context_group | plain_reward_context");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a policy checkpoint");
    std::uint64_t n_samples = 4;
    std::uint32_t eval_max_rounds = 4;
    add_common(eval, true);
    eval->add_option("--policy", policy_path, "policy checkpoint JSON")->required();
    eval->add_option("--n-samples", n_samples, "samples per problem")->capture_default_str();
    eval->add_option("--max-rounds", eval_max_rounds, "sampling round cap")
        ->capture_default_str();

    // report
    auto* report = app.add_subcommand("report", "merge metrics of several runs");
    std::vector<std::string> run_dirs;
    report->add_option("--out", out_dir, "output CSV path")->required();
    report->add_option("runs", run_dirs, "run directories with metrics.csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints the message or help text
        return rc == 0 ? 0 : 1;     // every parse failure is a usage error
    }

    if (gen_problems->parsed()) {
        const json file_config = load_config_file(config_path);
        json resolved = resolve_config(
            json{{"count", count},
                 {"bins", num_bins},
                 {"alphabet_size", alphabet_size},
                 {"bin_weights", bin_weights},
                 {"seed", seed}},
            file_config, json::object());
        // Flags win over the config file when given explicitly.
        if (gen_problems->count("--count")) resolved["count"] = count;
        if (gen_problems->count("--bins")) resolved["bins"] = num_bins;
        if (gen_problems->count("--alphabet-size")) resolved["alphabet_size"] = alphabet_size;
        if (gen_problems->count("--bin-weights")) resolved["bin_weights"] = bin_weights;
        if (gen_problems->count("--seed")) resolved["seed"] = seed;

        const std::vector<double> weights =
            resolved["bin_weights"].get<std::vector<double>>();
        svrl_problems* problems = nullptr;
        check(svrl_problems_generate(resolved["count"].get<std::uint64_t>(),
                                     resolved["bins"].get<std::uint32_t>(),
                                     resolved["alphabet_size"].get<std::uint32_t>(),
                                     weights.empty() ? nullptr : weights.data(),
                                     resolved["seed"].get<std::uint64_t>(), &problems));
        ProblemsPtr guard(problems, &svrl_problems_free);
        write_resolved_config(out_dir, resolved);
        check(svrl_problems_save(problems, (out_dir + "/problems.jsonl").c_str()));
        json manifest = resolved;
        manifest["problems"] = svrl_problems_count(problems);
        std::ofstream(out_dir + "/manifest.json") << manifest.dump(2) << "\n";
        std::printf("wrote %zu problems to %s/problems.jsonl\n",
                    svrl_problems_count(problems), out_dir.c_str());
        return 0;
    }

    if (gen_sft->parsed()) {
        const json file_config = load_config_file(config_path);
        json resolved = resolve_config(json{{"samples_per_problem", 5},
                                            {"retry_budget", 50},
                                            {"seed", seed}},
                                       file_config, json::object());
        if (gen_sft->count("--seed")) resolved["seed"] = seed;
        ProblemsPtr problems = load_problems_or_die(problems_path);
        PolicyPtr policy = load_policy_or_die(policy_path);
        svrl_sft_dataset* dataset = nullptr;
        json build_config = resolved;
        build_config.erase("seed");
        check(svrl_sft_build(policy.get(), problems.get(), build_config.dump().c_str(),
                             resolved["seed"].get<std::uint64_t>(), &dataset));
        std::unique_ptr<svrl_sft_dataset, decltype(&svrl_sft_dataset_free)> guard(
            dataset, &svrl_sft_dataset_free);
        write_resolved_config(out_dir, resolved);
        check(svrl_sft_save(dataset, out_dir.c_str()));
        StringOut manifest;
        check(svrl_sft_manifest(dataset, &manifest.value));
        std::ofstream(out_dir + "/manifest.json") << manifest.value;
        std::printf("wrote %zu SFT examples to %s/sft.jsonl\n", svrl_sft_size(dataset),
                    out_dir.c_str());
        return 0;
    }

    if (train->parsed()) {
        StringOut defaults_json;
        check(svrl_train_default_config(mode.c_str(), &defaults_json.value));
        json defaults = json::parse(defaults_json.value);
        json flag_config = json::object();
        if (*steps_opt) flag_config["steps"] = steps;
        if (*lr_opt) flag_config["lr"] = lr;
        if (*beta_opt) flag_config["beta"] = beta;
        if (*clip_opt) flag_config["clip"] = clip;
        if (*spp_opt) flag_config["samples_per_prompt"] = samples_per_prompt;
        if (*rounds_opt) flag_config["max_rounds"] = max_rounds;
        if (*baseline_opt) flag_config["baseline_mode"] = baseline_mode;
        if (*filter_opt) {
            double lo = 0.0, hi = 0.0;
            if (!parse_filter_range(filter_range, lo, hi)) {
                std::fprintf(stderr, "error: --filter-range expects lo:hi\n");
                return 1;
            }
            flag_config["filter_lo"] = lo;
            flag_config["filter_hi"] = hi;
        }
        if (!sft_path.empty()) flag_config["sft_path"] = sft_path;

        json resolved = resolve_config(defaults, load_config_file(config_path), flag_config);
        resolved["mode"] = mode;
        resolved["seed"] = seed;
        resolved["problems"] = problems_path;
        if (!policy_path.empty()) resolved["initial_policy"] = policy_path;

        ProblemsPtr problems = load_problems_or_die(problems_path);
        PolicyPtr policy = policy_path.empty()
                               ? default_policy(problems_num_bins(problems_path))
                               : load_policy_or_die(policy_path);
        write_resolved_config(out_dir, resolved);
        check(svrl_train_run(policy.get(), problems.get(), mode.c_str(),
                             resolved.dump().c_str(), seed, out_dir.c_str(), nullptr));
        std::printf("training finished; log at %s/train_log.csv\n", out_dir.c_str());
        return 0;
    }

    if (eval->parsed()) {
        const json file_config = load_config_file(config_path);
        json resolved = resolve_config(json{{"n_samples", n_samples},
                                            {"max_rounds", eval_max_rounds},
                                            {"seed", seed}},
                                       file_config, json::object());
        if (eval->count("--n-samples")) resolved["n_samples"] = n_samples;
        if (eval->count("--max-rounds")) resolved["max_rounds"] = eval_max_rounds;
        if (eval->count("--seed")) resolved["seed"] = seed;
        resolved["policy"] = policy_path;
        resolved["problems"] = problems_path;
        ProblemsPtr problems = load_problems_or_die(problems_path);
        PolicyPtr policy = load_policy_or_die(policy_path);
        write_resolved_config(out_dir, resolved);
        check(svrl_eval_run(policy.get(), problems.get(),
                            resolved["n_samples"].get<std::uint64_t>(),
                            resolved["seed"].get<std::uint64_t>(),
                            resolved["max_rounds"].get<std::uint32_t>(), out_dir.c_str(),
                            nullptr));
        std::printf("metrics written to %s/metrics.json\n", out_dir.c_str());
        return 0;
    }

    if (report->parsed()) {
        std::vector<const char*> dirs;
        for (const std::string& dir : run_dirs) dirs.push_back(dir.c_str());
        check(svrl_report_merge(dirs.data(), dirs.size(), out_dir.c_str()));
        std::printf("merged %zu runs into %s\n", dirs.size(), out_dir.c_str());
        return 0;
    }

    return 1;
}
