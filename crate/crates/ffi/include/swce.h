/* Generated by cbindgen from crates/ffi/src/lib.rs. */

#ifndef SWCE_H
#define SWCE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SwceStatus {
  SWCE_STATUS_OK = 0,
  SWCE_STATUS_NULL_POINTER = 1,
  SWCE_STATUS_INVALID_UTF8 = 2,
  SWCE_STATUS_INVALID_ARGUMENT = 3,
  SWCE_STATUS_INVALID_CONFIG = 4,
  SWCE_STATUS_FAILED = 5,
  SWCE_STATUS_PANIC = 6,
} SwceStatus;

typedef enum SwceEstimatorKind {
  SWCE_ESTIMATOR_KIND_NFCFGS = 0,
  SWCE_ESTIMATOR_KIND_FCFGS = 1,
  SWCE_ESTIMATOR_KIND_NARROWBAND = 2,
} SwceEstimatorKind;

typedef struct SwceEstimate SwceEstimate;

typedef struct SwceExperiment SwceExperiment;

typedef struct SwceResults SwceResults;

typedef struct SwceScenario SwceScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *swce_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *swce_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void swce_string_free(char *s);

/**
 * Parses an experiment description (JSON, or TOML when it does not start
 * with `{`) and validates it.
 *
 * # Safety
 * `config_text` must be a NUL-terminated string; `out` a writable pointer.
 */
enum SwceStatus swce_experiment_new(const char *config_text, struct SwceExperiment **out);

/**
 * # Safety
 * `exp` must be NULL or a handle from [`swce_experiment_new`], not yet freed.
 */
void swce_experiment_free(struct SwceExperiment *exp);

/**
 * # Safety
 * `exp` must be a live experiment handle.
 */
enum SwceStatus swce_experiment_set_trials(struct SwceExperiment *exp, size_t trials);

/**
 * # Safety
 * `exp` must be a live experiment handle.
 */
enum SwceStatus swce_experiment_set_seed(struct SwceExperiment *exp, uint64_t seed);

/**
 * Resolved configuration as JSON.
 *
 * # Safety
 * `exp` must be a live experiment handle; `out` a writable pointer.
 */
enum SwceStatus swce_experiment_config_json(const struct SwceExperiment *exp, char **out);

/**
 * Runs every trial of the experiment.
 *
 * # Safety
 * `exp` must be a live experiment handle; `out` a writable pointer.
 */
enum SwceStatus swce_experiment_run(const struct SwceExperiment *exp, struct SwceResults **out);

/**
 * # Safety
 * `res` must be NULL or a handle from [`swce_experiment_run`], not yet freed.
 */
void swce_results_free(struct SwceResults *res);

/**
 * Number of table rows (excluding the header).
 *
 * # Safety
 * `res` must be a live results handle; `rows` a writable pointer.
 */
enum SwceStatus swce_results_rows(const struct SwceResults *res, size_t *rows);

/**
 * Result table as CSV.
 *
 * # Safety
 * `res` must be a live results handle; `out` a writable pointer.
 */
enum SwceStatus swce_results_csv(const struct SwceResults *res, char **out);

/**
 * Full result document (fingerprint, configuration, table, trials) as JSON.
 *
 * # Safety
 * `res` must be a live results handle; `out` a writable pointer.
 */
enum SwceStatus swce_results_json(const struct SwceResults *res, char **out);

/**
 * Draws one noisy, quantized scenario for the experiment's base system.
 *
 * # Safety
 * `exp` must be a live experiment handle; `out` a writable pointer.
 */
enum SwceStatus swce_scenario_draw(const struct SwceExperiment *exp,
                                   uint64_t seed,
                                   struct SwceScenario **out);

/**
 * # Safety
 * `sc` must be NULL or a handle from [`swce_scenario_draw`], not yet freed.
 */
void swce_scenario_free(struct SwceScenario *sc);

/**
 * Number of quantized complex samples in the scenario.
 *
 * # Safety
 * `sc` must be a live scenario handle; `len` a writable pointer.
 */
enum SwceStatus swce_scenario_samples(const struct SwceScenario *sc, size_t *len);

/**
 * Runs one estimator (a [`SwceEstimatorKind`] value) on the scenario with
 * cross-validation stopping.
 *
 * # Safety
 * `sc` must be a live scenario handle; `out` a writable pointer.
 */
enum SwceStatus swce_scenario_estimate(const struct SwceScenario *sc,
                                       int32_t kind,
                                       struct SwceEstimate **out);

/**
 * # Safety
 * `est` must be NULL or a handle from [`swce_scenario_estimate`], not yet freed.
 */
void swce_estimate_free(struct SwceEstimate *est);

/**
 * Normalized squared error against the scenario's true channel.
 *
 * # Safety
 * `est` must be a live estimate handle; `nmse` a writable pointer.
 */
enum SwceStatus swce_estimate_nmse(const struct SwceEstimate *est, double *nmse);

/**
 * Number of recovered paths.
 *
 * # Safety
 * `est` must be a live estimate handle; `count` a writable pointer.
 */
enum SwceStatus swce_estimate_path_count(const struct SwceEstimate *est, size_t *count);

/**
 * Copies path `index`: angle (rad), delay (s), user, and complex gain.
 *
 * # Safety
 * `est` must be a live estimate handle; the output pointers writable.
 */
enum SwceStatus swce_estimate_path(const struct SwceEstimate *est,
                                   size_t index,
                                   double *theta,
                                   double *tau,
                                   size_t *user,
                                   double *gain_re,
                                   double *gain_im);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SWCE_H */
