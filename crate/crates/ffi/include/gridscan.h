#ifndef GRIDSCAN_H
#define GRIDSCAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GsStatus {
  GS_STATUS_OK = 0,
  GS_STATUS_NULL_POINTER = 1,
  GS_STATUS_INVALID_ARGUMENT = 2,
  GS_STATUS_INVALID_CONFIG = 3,
  GS_STATUS_INVALID_DATA = 4,
  GS_STATUS_IO = 5,
  GS_STATUS_ORACLE = 6,
  GS_STATUS_BUFFER_TOO_SMALL = 7,
  GS_STATUS_PANIC = 8,
  GS_STATUS_INTERNAL = 9,
} GsStatus;

/**
 * Normalized operating points.
 */
typedef struct GsDataset GsDataset;

/**
 * A stability oracle with evaluation counting.
 */
typedef struct GsOracle GsOracle;

/**
 * Result of a fast scan or a full-versus-fast comparison.
 */
typedef struct GsReport GsReport;

/**
 * Stability index callback. Writes the index of the `dim`-long normalized
 * point to `out` and returns 0, or returns non-zero on failure. May be
 * called concurrently from several threads.
 */
typedef int (*GsStabilityFn)(void *user_data, const double *point, size_t dim, double *out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *gs_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gs_version(void);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gs_string_free(char *s);

/**
 * Generate a synthetic year. `config_json` may be NULL for the defaults.
 *
 * # Safety
 * `config_json` is NULL or a NUL-terminated string; `out` is writable.
 */
enum GsStatus gs_dataset_generate(const char *config_json, struct GsDataset **out);

/**
 * Load `hour,<attr>...` CSV.
 *
 * # Safety
 * `path` is a NUL-terminated string; `out` is writable.
 */
enum GsStatus gs_dataset_load_csv(const char *path, struct GsDataset **out);

/**
 * Normalize a row-major `n_rows x n_cols` matrix of raw values. Rows are
 * hours `0..n_rows`; attributes are named `a0`, `a1`, ...
 *
 * # Safety
 * `values` points to `n_rows * n_cols` doubles; `out` is writable.
 */
enum GsStatus gs_dataset_from_rows(const double *values,
                                   size_t n_rows,
                                   size_t n_cols,
                                   struct GsDataset **out);

/**
 * Number of hours, or 0 for NULL.
 *
 * # Safety
 * `ds` is NULL or a live dataset handle.
 */
size_t gs_dataset_len(const struct GsDataset *ds);

/**
 * Number of attributes, or 0 for NULL.
 *
 * # Safety
 * `ds` is NULL or a live dataset handle.
 */
size_t gs_dataset_n_attributes(const struct GsDataset *ds);

/**
 * Copy the normalized row `i` into `out` (`len >= n_attributes`).
 *
 * # Safety
 * `ds` is a live handle; `out` points to `len` writable doubles.
 */
enum GsStatus gs_dataset_row(const struct GsDataset *ds, size_t i, double *out, size_t len);

/**
 * # Safety
 * `ds` is NULL or a live handle not used afterwards.
 */
void gs_dataset_free(struct GsDataset *ds);

/**
 * Build one of the analytic oracles from an oracle config document
 * (`{"model": {"kind": ...}, "delay_ms": ...}`); NULL selects the damping
 * surrogate over the dataset's informative attributes.
 *
 * # Safety
 * `ds` is a live handle; `config_json` is NULL or NUL-terminated; `out` is
 * writable.
 */
enum GsStatus gs_oracle_new(const struct GsDataset *ds,
                            const char *config_json,
                            struct GsOracle **out);

/**
 * Wrap a caller-supplied stability function. `delay_ms` adds an artificial
 * cost per evaluation.
 *
 * # Safety
 * `callback` and `user_data` must stay valid, and be safe to use from
 * several threads, until the oracle is freed.
 */
enum GsStatus gs_oracle_from_callback(GsStabilityFn callback,
                                      void *user_data,
                                      double delay_ms,
                                      struct GsOracle **out);

/**
 * Evaluate the oracle at one normalized point.
 *
 * # Safety
 * `oracle` is live; `point` holds `dim` doubles; `out` is writable.
 */
enum GsStatus gs_oracle_evaluate(const struct GsOracle *oracle,
                                 const double *point,
                                 size_t dim,
                                 double *out);

/**
 * Evaluations performed so far, or 0 for NULL.
 *
 * # Safety
 * `oracle` is NULL or live.
 */
uint64_t gs_oracle_eval_count(const struct GsOracle *oracle);

/**
 * # Safety
 * `oracle` is NULL or a live handle not used afterwards.
 */
void gs_oracle_free(struct GsOracle *oracle);

/**
 * Feature selection, clustering and centroid evaluation. `config_json` is a
 * scan config document or NULL for the defaults; its `oracle` section is
 * ignored in favour of `oracle`.
 *
 * # Safety
 * Handles are live; `config_json` is NULL or NUL-terminated; `out` is
 * writable.
 */
enum GsStatus gs_fast_scan(const struct GsDataset *ds,
                           const struct GsOracle *oracle,
                           const char *config_json,
                           struct GsReport **out);

/**
 * Full scan plus fast scan, validation and speed-up.
 *
 * # Safety
 * As for [`gs_fast_scan`].
 */
enum GsStatus gs_compare(const struct GsDataset *ds,
                         const struct GsOracle *oracle,
                         const char *config_json,
                         struct GsReport **out);

/**
 * Number of hours covered by the report, or 0 for NULL.
 *
 * # Safety
 * `report` is NULL or live.
 */
size_t gs_report_len(const struct GsReport *report);

/**
 * Number of clusters, or 0 for NULL.
 *
 * # Safety
 * `report` is NULL or live.
 */
size_t gs_report_k_final(const struct GsReport *report);

/**
 * Whether feature selection and clustering both converged.
 *
 * # Safety
 * `report` is NULL or live.
 */
bool gs_report_converged(const struct GsReport *report);

/**
 * Full-over-fast speed-up, or NaN when the report has no full scan.
 *
 * # Safety
 * `report` is NULL or live.
 */
double gs_report_speedup(const struct GsReport *report);

/**
 * Copy the per-hour estimates into `out` (`len >= gs_report_len`).
 *
 * # Safety
 * `report` is live; `out` points to `len` writable doubles.
 */
enum GsStatus gs_report_lambda_hat(const struct GsReport *report, double *out, size_t len);

/**
 * Copy the per-hour cluster ids into `out` (`len >= gs_report_len`).
 *
 * # Safety
 * `report` is live; `out` points to `len` writable elements.
 */
enum GsStatus gs_report_cluster_ids(const struct GsReport *report, size_t *out, size_t len);

/**
 * The whole report as JSON; release with [`gs_string_free`]. NULL on
 * failure.
 *
 * # Safety
 * `report` is NULL or live.
 */
char *gs_report_to_json(const struct GsReport *report);

/**
 * # Safety
 * `report` is NULL or a live handle not used afterwards.
 */
void gs_report_free(struct GsReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDSCAN_H */
