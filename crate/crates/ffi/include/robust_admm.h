#ifndef ROBUST_ADMM_H
#define ROBUST_ADMM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every exported function.
 */
typedef enum RaStatus {
  RA_STATUS_OK = 0,
  RA_STATUS_NULL_POINTER = 1,
  RA_STATUS_INVALID_UTF8 = 2,
  RA_STATUS_INVALID_CONFIG = 3,
  RA_STATUS_INVALID_TOPOLOGY = 4,
  RA_STATUS_DOMAIN_ERROR = 5,
  RA_STATUS_NOT_RUN = 6,
  RA_STATUS_OUT_OF_RANGE = 7,
  RA_STATUS_NUMERICAL = 8,
  RA_STATUS_IO = 9,
  RA_STATUS_PANIC = 10,
} RaStatus;

/**
 * Opaque experiment handle.
 */
typedef struct RaExperiment RaExperiment;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ra_last_error_message(void);

/**
 * Creates a handle from a JSON config; missing keys take the regression defaults.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string and `out` a writable pointer.
 */
enum RaStatus ra_experiment_from_json(const char *json, struct RaExperiment **out);

/**
 * Creates a handle with the default regression config.
 *
 * # Safety
 * `out` must be a writable pointer.
 */
enum RaStatus ra_experiment_default(struct RaExperiment **out);

/**
 * Runs the experiment, replacing any previous result.
 *
 * # Safety
 * `h` must come from a constructor in this library and not be freed.
 */
enum RaStatus ra_experiment_run(struct RaExperiment *h);

/**
 * Penalty actually used by the last run.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum RaStatus ra_experiment_penalty(const struct RaExperiment *h, double *out);

/**
 * Number of recorded iterations, including `k = 0`.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum RaStatus ra_experiment_record_count(const struct RaExperiment *h, size_t *out);

/**
 * Optimality gap of record `idx`.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum RaStatus ra_experiment_gap_at(const struct RaExperiment *h, size_t idx, double *out);

/**
 * Median absolute gap over the trailing fifth of the run.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum RaStatus ra_experiment_plateau(const struct RaExperiment *h, double *out);

/**
 * Number of flag events raised by a robust run.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum RaStatus ra_experiment_flag_count(const struct RaExperiment *h, size_t *out);

/**
 * Number of bound reports with at least one violation.
 *
 * # Safety
 * `h` must be a live handle and `out` writable.
 */
enum RaStatus ra_experiment_violation_count(const struct RaExperiment *h, size_t *out);

/**
 * Writes the trace, bounds, flags, plot and constants files into `dir`.
 *
 * # Safety
 * `h` must be a live handle and `dir` a NUL-terminated path.
 */
enum RaStatus ra_experiment_write_outputs(const struct RaExperiment *h, const char *dir);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must be null or a live handle; it is invalid afterwards.
 */
void ra_experiment_free(struct RaExperiment *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBUST_ADMM_H */
