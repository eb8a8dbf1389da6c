#include "svrl/svrl.h"

#include <cstring>
#include <string>

#include "io.hpp"
#include "runners.hpp"
#include "sft.hpp"

using svrl::Error;
using svrl::ErrorCode;

struct svrl_problems {
    svrl::ProblemSet set;
};

struct svrl_policy {
    svrl::SyntheticPolicy policy;
};

struct svrl_sft_dataset {
    std::vector<svrl::SftExample> examples;
    nlohmann::json manifest;
};

namespace {

thread_local std::string g_last_error;

svrl_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::Usage: return SVRL_ERR_USAGE;
        case ErrorCode::Data: return SVRL_ERR_DATA;
        case ErrorCode::Numeric: return SVRL_ERR_NUMERIC;
        case ErrorCode::Io: return SVRL_ERR_IO;
        case ErrorCode::Internal: return SVRL_ERR_INTERNAL;
    }
    return SVRL_ERR_INTERNAL;
}

template <typename Fn>
svrl_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SVRL_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SVRL_ERR_INTERNAL;
    }
}

svrl_status require(bool condition, const char* message) {
    if (condition) return SVRL_OK;
    g_last_error = message;
    return SVRL_ERR_USAGE;
}

char* copy_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

nlohmann::json parse_config(const char* config_json) {
    if (!config_json || !*config_json) return nlohmann::json::object();
    nlohmann::json j = nlohmann::json::parse(config_json, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw Error(ErrorCode::Usage, "config must be a JSON object");
    return j;
}

svrl::SftBuildOptions parse_sft_options(const nlohmann::json& config) {
    svrl::SftBuildOptions options;
    if (auto it = config.find("samples_per_problem"); it != config.end())
        options.samples_per_problem = it->get<int>();
    if (auto it = config.find("retry_budget"); it != config.end())
        options.retry_budget = it->get<int>();
    if (auto it = config.find("buckets"); it != config.end()) {
        options.buckets.clear();
        for (const nlohmann::json& b : *it) {
            if (!b.is_array() || b.size() != 3)
                throw Error(ErrorCode::Usage, "each bucket must be [lo, hi, rounds]");
            options.buckets.push_back(
                {b[0].get<double>(), b[1].get<double>(), b[2].get<int>()});
        }
    }
    return options;
}

}  // namespace

extern "C" {

const char* svrl_version(void) { return "0.1.0"; }

const char* svrl_last_error(void) { return g_last_error.c_str(); }

void svrl_string_free(char* s) { delete[] s; }

svrl_status svrl_problems_generate(uint64_t count, uint32_t num_bins, uint32_t alphabet_size,
                                   const double* bin_weights, uint64_t seed,
                                   svrl_problems** out) {
    if (auto rc = require(out != nullptr, "out must not be NULL")) return rc;
    return guarded([&] {
        std::vector<double> weights;
        if (bin_weights) weights.assign(bin_weights, bin_weights + num_bins);
        *out = new svrl_problems{svrl::generate_problems(
            count, static_cast<int>(num_bins), static_cast<int>(alphabet_size), weights, seed)};
    });
}

svrl_status svrl_problems_load(const char* jsonl_path, svrl_problems** out) {
    if (auto rc = require(jsonl_path && out, "path and out must not be NULL")) return rc;
    return guarded([&] { *out = new svrl_problems{svrl::load_problems(jsonl_path)}; });
}

svrl_status svrl_problems_save(const svrl_problems* problems, const char* jsonl_path) {
    if (auto rc = require(problems && jsonl_path, "problems and path must not be NULL"))
        return rc;
    return guarded([&] { svrl::save_problems(problems->set, jsonl_path); });
}

size_t svrl_problems_count(const svrl_problems* problems) {
    return problems ? problems->set.size() : 0;
}

void svrl_problems_free(svrl_problems* problems) { delete problems; }

svrl_status svrl_policy_create(uint32_t num_bins, const double* solve_logits,
                               const double* verify_tp_logits, const double* verify_tn_logits,
                               svrl_policy** out) {
    if (auto rc = require(num_bins > 0 && solve_logits && verify_tp_logits &&
                              verify_tn_logits && out,
                          "logit arrays and out must not be NULL"))
        return rc;
    return guarded([&] {
        *out = new svrl_policy{svrl::SyntheticPolicy(
            std::vector<double>(solve_logits, solve_logits + num_bins),
            std::vector<double>(verify_tp_logits, verify_tp_logits + num_bins),
            std::vector<double>(verify_tn_logits, verify_tn_logits + num_bins))};
    });
}

svrl_status svrl_policy_load(const char* json_path, svrl_policy** out) {
    if (auto rc = require(json_path && out, "path and out must not be NULL")) return rc;
    return guarded([&] { *out = new svrl_policy{svrl::load_policy(json_path)}; });
}

svrl_status svrl_policy_save(const svrl_policy* policy, const char* json_path) {
    if (auto rc = require(policy && json_path, "policy and path must not be NULL")) return rc;
    return guarded([&] { svrl::save_policy(policy->policy, json_path); });
}

uint32_t svrl_policy_num_bins(const svrl_policy* policy) {
    return policy ? static_cast<uint32_t>(policy->policy.num_bins()) : 0;
}

svrl_status svrl_policy_get_logit(const svrl_policy* policy, const char* kind, uint32_t bin,
                                  double* out) {
    if (auto rc = require(policy && kind && out, "policy, kind, and out must not be NULL"))
        return rc;
    return guarded([&] {
        const std::string name = kind;
        const int b = static_cast<int>(bin);
        if (b >= policy->policy.num_bins())
            throw Error(ErrorCode::Usage, "bin index out of range");
        if (name == "solve")
            *out = policy->policy.solve_logit(b);
        else if (name == "verify_tp")
            *out = policy->policy.verify_tp_logit(b);
        else if (name == "verify_tn")
            *out = policy->policy.verify_tn_logit(b);
        else
            throw Error(ErrorCode::Usage, "unknown parameter kind '" + name + "'");
    });
}

void svrl_policy_free(svrl_policy* policy) { delete policy; }

svrl_status svrl_sft_build(const svrl_policy* policy, const svrl_problems* problems,
                           const char* config_json, uint64_t seed, svrl_sft_dataset** out) {
    if (auto rc = require(policy && problems && out,
                          "policy, problems, and out must not be NULL"))
        return rc;
    return guarded([&] {
        const nlohmann::json config = parse_config(config_json);
        const svrl::SftBuildOptions options = parse_sft_options(config);
        svrl::SftBuildResult result =
            svrl::build_sft_dataset(policy->policy, problems->set, options, seed);
        nlohmann::json buckets = nlohmann::json::array();
        for (const svrl::DifficultyBucket& b : options.buckets)
            buckets.push_back({b.lo, b.hi, b.rounds});
        nlohmann::json manifest = {
            {"examples", result.examples.size()},
            {"skipped_no_correct", result.skipped_no_correct},
            {"skipped_small_alphabet", result.skipped_small_alphabet},
            {"samples_per_problem", options.samples_per_problem},
            {"retry_budget", options.retry_budget},
            {"buckets", std::move(buckets)},
            {"seed", seed}};
        *out = new svrl_sft_dataset{std::move(result.examples), std::move(manifest)};
    });
}

size_t svrl_sft_size(const svrl_sft_dataset* dataset) {
    return dataset ? dataset->examples.size() : 0;
}

svrl_status svrl_sft_manifest(const svrl_sft_dataset* dataset, char** json_out) {
    if (auto rc = require(dataset && json_out, "dataset and json_out must not be NULL"))
        return rc;
    return guarded([&] { *json_out = copy_string(dataset->manifest.dump(2) + "\n"); });
}

svrl_status svrl_sft_save(const svrl_sft_dataset* dataset, const char* out_dir) {
    if (auto rc = require(dataset && out_dir, "dataset and out_dir must not be NULL"))
        return rc;
    return guarded([&] {
        svrl::save_sft_dataset(dataset->examples, std::string(out_dir) + "/sft.jsonl");
    });
}

void svrl_sft_dataset_free(svrl_sft_dataset* dataset) { delete dataset; }

svrl_status svrl_train_run(const svrl_policy* initial, const svrl_problems* problems,
                           const char* mode, const char* config_json, uint64_t seed,
                           const char* out_dir, svrl_policy** final) {
    if (auto rc = require(initial && problems && mode && out_dir,
                          "initial, problems, mode, and out_dir must not be NULL"))
        return rc;
    return guarded([&] {
        svrl::SyntheticPolicy trained = svrl::run_train(
            mode, initial->policy, problems->set, parse_config(config_json), seed, out_dir);
        if (final) *final = new svrl_policy{std::move(trained)};
    });
}

svrl_status svrl_train_default_config(const char* mode, char** json_out) {
    if (auto rc = require(mode && json_out, "mode and json_out must not be NULL")) return rc;
    return guarded(
        [&] { *json_out = copy_string(svrl::train_default_config(mode).dump(2) + "\n"); });
}

svrl_status svrl_eval_run(const svrl_policy* policy, const svrl_problems* problems,
                          uint64_t n_samples, uint64_t seed, uint32_t max_rounds,
                          const char* out_dir, char** report_json) {
    if (auto rc = require(policy && problems, "policy and problems must not be NULL"))
        return rc;
    return guarded([&] {
        svrl::MetricsReport report = svrl::run_eval(
            policy->policy, problems->set, static_cast<int>(n_samples), seed,
            static_cast<int>(max_rounds), out_dir ? out_dir : "", "policy", "problems");
        if (report_json)
            *report_json = copy_string(svrl::metrics_to_json(report).dump(2) + "\n");
    });
}

svrl_status svrl_report_merge(const char* const* run_dirs, size_t n_dirs,
                              const char* out_csv) {
    if (auto rc = require(run_dirs && out_csv, "run_dirs and out_csv must not be NULL"))
        return rc;
    return guarded([&] {
        std::vector<std::string> dirs(run_dirs, run_dirs + n_dirs);
        svrl::merge_reports(dirs, out_csv);
    });
}

}  // extern "C"
