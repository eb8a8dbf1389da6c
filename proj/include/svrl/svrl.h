/*
 * svrl - solve/verify/retry-loop training framework, C interface.
 *
 * Every function returns a status code; on failure, svrl_last_error() holds
 * a message for the calling thread. Objects returned through out-parameters
 * are owned by the caller and released with the matching _free function.
 * Strings returned through out-parameters are released with
 * svrl_string_free.
 */
#ifndef SVRL_H
#define SVRL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum svrl_status {
    SVRL_OK = 0,
    SVRL_ERR_USAGE = 1,    /* bad arguments or configuration */
    SVRL_ERR_DATA = 2,     /* malformed input data */
    SVRL_ERR_NUMERIC = 3,  /* non-finite loss or probability */
    SVRL_ERR_IO = 4,       /* filesystem failure */
    SVRL_ERR_INTERNAL = 5, /* broken invariant */
} svrl_status;

const char* svrl_version(void);

/* Message for the last failing call on this thread; empty when none. */
const char* svrl_last_error(void);

void svrl_string_free(char* s);

/* ---- problem sets ---- */

typedef struct svrl_problems svrl_problems;

/* Generates `count` synthetic problems over `num_bins` difficulty bins with
 * the given answer-alphabet size. bin_weights (length num_bins) may be NULL
 * for uniform apportionment. Identical seeds give identical problem sets. */
svrl_status svrl_problems_generate(uint64_t count, uint32_t num_bins, uint32_t alphabet_size,
                                   const double* bin_weights, uint64_t seed,
                                   svrl_problems** out);
svrl_status svrl_problems_load(const char* jsonl_path, svrl_problems** out);
svrl_status svrl_problems_save(const svrl_problems* problems, const char* jsonl_path);
size_t svrl_problems_count(const svrl_problems* problems);
void svrl_problems_free(svrl_problems* problems);

/* ---- policies ---- */

typedef struct svrl_policy svrl_policy;

/* One logit per difficulty bin for each of the three decision kinds. */
svrl_status svrl_policy_create(uint32_t num_bins, const double* solve_logits,
                               const double* verify_tp_logits, const double* verify_tn_logits,
                               svrl_policy** out);
svrl_status svrl_policy_load(const char* json_path, svrl_policy** out);
svrl_status svrl_policy_save(const svrl_policy* policy, const char* json_path);
uint32_t svrl_policy_num_bins(const svrl_policy* policy);
/* kind is one of "solve", "verify_tp", "verify_tn". */
svrl_status svrl_policy_get_logit(const svrl_policy* policy, const char* kind, uint32_t bin,
                                  double* out);
void svrl_policy_free(svrl_policy* policy);

/* ---- behavior-initialization datasets ---- */

typedef struct svrl_sft_dataset svrl_sft_dataset;

/* Builds the trial-and-error SFT dataset. config_json may be NULL or a flat
 * JSON object with keys samples_per_problem (5), retry_budget (50), and
 * buckets ([[lo, hi, rounds], ...] partitioning [0,1]). */
svrl_status svrl_sft_build(const svrl_policy* policy, const svrl_problems* problems,
                           const char* config_json, uint64_t seed, svrl_sft_dataset** out);
size_t svrl_sft_size(const svrl_sft_dataset* dataset);
/* Manifest JSON: example count and skip counters. */
svrl_status svrl_sft_manifest(const svrl_sft_dataset* dataset, char** json_out);
/* Writes <out_dir>/sft.jsonl. */
svrl_status svrl_sft_save(const svrl_sft_dataset* dataset, const char* out_dir);
void svrl_sft_dataset_free(svrl_sft_dataset* dataset);

/* ---- training, evaluation, reporting ---- */

/* Runs a full training loop. mode is one of "sft", "rloo", "process",
 * "offline-orl", "offline-prl"; config_json may be NULL or a flat JSON
 * object (see the project README for keys and defaults). Writes
 * train_log.csv, checkpoints, and policy_final.json under out_dir. Reruns
 * with identical inputs produce byte-identical logs. When final is non-NULL
 * it receives the trained policy. */
svrl_status svrl_train_run(const svrl_policy* initial, const svrl_problems* problems,
                           const char* mode, const char* config_json, uint64_t seed,
                           const char* out_dir, svrl_policy** final);

/* Full default config JSON for a training mode, as svrl_train_run resolves
 * missing keys. */
svrl_status svrl_train_default_config(const char* mode, char** json_out);

/* Samples n_samples trajectories per problem and aggregates the
 * verification/correction metric suite. Writes metrics.json and metrics.csv
 * under out_dir unless it is NULL; report_json (optional) receives the
 * report. */
svrl_status svrl_eval_run(const svrl_policy* policy, const svrl_problems* problems,
                          uint64_t n_samples, uint64_t seed, uint32_t max_rounds,
                          const char* out_dir, char** report_json);

/* Merges the metrics.csv of n_dirs run directories into one comparison CSV.
 * All inputs must share one schema. */
svrl_status svrl_report_merge(const char* const* run_dirs, size_t n_dirs,
                              const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* SVRL_H */
