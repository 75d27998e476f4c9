/* C interface to the spoofing-detection library.
 *
 * All functions return sd_status; SD_OK means success. On failure the
 * thread-local message from sd_last_error() describes the problem. Output
 * handles are written only on success and must be released with the matching
 * _free function. Strings returned through char** outputs are heap-allocated
 * and must be released with sd_string_free.
 *
 * Handles are immutable after creation, so concurrent reads of one handle
 * from several threads are safe.
 */
#ifndef SPOOFDET_H
#define SPOOFDET_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sd_status {
  SD_OK = 0,
  SD_ERR_INVALID_ARGUMENT = 1,
  SD_ERR_IO = 2,
  SD_ERR_PARSE = 3,
  SD_ERR_INFEASIBLE = 4,
  SD_ERR_INTERNAL = 5
} sd_status;

typedef struct sd_env sd_env;           /* radio environment (channel model) */
typedef struct sd_dataset sd_dataset;   /* per-location RSS estimate sets */
typedef struct sd_detector sd_detector; /* position-change detector */

/* Message for the most recent failure on the calling thread; never NULL. */
const char* sd_last_error(void);

void sd_string_free(char* s);

/* Version string of the library, static storage. */
const char* sd_version(void);

/* ---- environment ---- */

sd_status sd_env_create_default(uint64_t seed, sd_env** out);
sd_status sd_env_load(const char* path, sd_env** out);
sd_status sd_env_save(const sd_env* env, const char* path);
void sd_env_free(sd_env* env);

/* ---- dataset ---- */

/* Measures RSS estimates on the default 52-location grid.
 * config_json uses the scenario-config schema ("n_samples",
 * "estimates_per_location", ...); unknown keys are rejected. NULL or ""
 * selects the defaults. */
sd_status sd_dataset_generate(const sd_env* env, const char* config_json, uint64_t seed,
                              sd_dataset** out);
sd_status sd_dataset_load(const char* path, sd_dataset** out);
sd_status sd_dataset_save(const sd_dataset* ds, const char* path);
sd_status sd_dataset_info(const sd_dataset* ds, int* n_locations, int* n_estimates,
                          int* n_features);
void sd_dataset_free(sd_dataset* ds);

/* ---- position-change detectors ---- */

/* kind: "dnnc", "dbc-l1", "dbc-l2" or "kmc". config_json as above. The
 * report, if requested, is a JSON object with the training accuracy and the
 * calibrated threshold. */
sd_status sd_detector_train(const sd_dataset* ds, const char* kind, const char* config_json,
                            uint64_t seed, sd_detector** out, char** report_json);
sd_status sd_detector_load(const char* path, sd_detector** out);
sd_status sd_detector_save(const sd_detector* det, const char* path);
sd_status sd_detector_kind(const sd_detector* det, char** kind);

/* Accuracy over `pairs` same-location plus `pairs` changed-location pairs
 * drawn from the dataset with the given seed. */
sd_status sd_detector_eval(const sd_detector* det, const sd_dataset* ds, int pairs,
                           uint64_t seed, double* accuracy);

/* Symmetric change statistic for two F-vectors of linear RSS estimates. */
sd_status sd_detector_statistic(const sd_detector* det, const double* r, const double* r_prime,
                                int n_features, double* out);
void sd_detector_free(sd_detector* det);

/* ---- spoofing detection ---- */

/* frames: t rows of n_features linear RSS values, row-major. mode is
 * "general" or "paper-literal". Returns the decision as JSON (decision,
 * statistic, threshold, region sequence, weights). */
sd_status sd_detect(const sd_detector* det, const double* frames, int t, int n_features,
                    double threshold, const char* mode, uint64_t louvain_seed,
                    char** decision_json);

/* ---- experiments ---- */

/* kind: "pcd-accuracy", "roc", "speed" or "pcd-compare". Writes results.csv,
 * summary.csv and config.json into out_dir. */
sd_status sd_experiment_run(const sd_dataset* ds, const char* kind, const char* config_json,
                            const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* SPOOFDET_H */
