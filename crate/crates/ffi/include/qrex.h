#ifndef QREX_H
#define QREX_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum QrexStatus {
  QREX_STATUS_OK = 0,
  QREX_STATUS_NULL_ARGUMENT = 1,
  QREX_STATUS_INVALID_UTF8 = 2,
  QREX_STATUS_CONFIG = 3,
  QREX_STATUS_MODEL = 4,
  QREX_STATUS_RUNTIME = 5,
  QREX_STATUS_IO = 6,
  QREX_STATUS_UNKNOWN_METRIC = 7,
  QREX_STATUS_BUFFER_TOO_SMALL = 8,
  QREX_STATUS_PANIC = 9,
} QrexStatus;

/**
 * A parsed experiment configuration.
 */
typedef struct QrexConfig QrexConfig;

/**
 * A finite MDP with its discount factor.
 */
typedef struct QrexModel QrexModel;

/**
 * The outcome of running an experiment over all its seeds.
 */
typedef struct QrexResult QrexResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *qrex_last_error(void);

/**
 * Library version as a static nul-terminated string.
 */
const char *qrex_version(void);

/**
 * Parses a TOML configuration. On success `*out` owns a new handle.
 *
 * # Safety
 * `toml` must be a nul-terminated string and `out` a valid pointer.
 */
enum QrexStatus qrex_config_parse(const char *toml, struct QrexConfig **out);

/**
 * Sets one configuration field, e.g. `("eta", "0.1")`. Keys are the full
 * field names as echoed by [`qrex_config_to_toml`]. The handle is left
 * unchanged on failure.
 *
 * # Safety
 * `config` must be a live handle; `key` and `value` nul-terminated strings.
 */
enum QrexStatus qrex_config_set(struct QrexConfig *config, const char *key, const char *value);

/**
 * Writes the effective configuration as TOML into `buf` (nul-terminated).
 * `*needed` receives the required size including the terminator; when
 * `cap` is too small nothing is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `config` must be a live handle, `buf` valid for `cap` bytes (or null when
 * `cap` is 0) and `needed` a valid pointer.
 */
enum QrexStatus qrex_config_to_toml(const struct QrexConfig *config,
                                    char *buf,
                                    size_t cap,
                                    size_t *needed);

/**
 * Releases a configuration. Null is ignored.
 *
 * # Safety
 * `config` must be null or a handle not yet freed.
 */
void qrex_config_free(struct QrexConfig *config);

/**
 * Runs every seed of the experiment on up to `jobs` threads.
 *
 * # Safety
 * `config` must be a live handle and `out` a valid pointer.
 */
enum QrexStatus qrex_run(const struct QrexConfig *config, size_t jobs, struct QrexResult **out);

/**
 * Number of seeds in the result.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t qrex_result_num_seeds(const struct QrexResult *result);

/**
 * Number of seeds that diverged.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
size_t qrex_result_num_diverged(const struct QrexResult *result);

/**
 * Mean over seeds of `metric` at each seed's last checkpoint.
 *
 * # Safety
 * `result` must be a live handle, `metric` nul-terminated and `mean` valid.
 */
enum QrexStatus qrex_result_final_mean(const struct QrexResult *result,
                                       const char *metric,
                                       double *mean);

/**
 * Copies the mean curve of `metric` into caller arrays of length `cap`.
 * `*len` receives the number of points; when it exceeds `cap` nothing is
 * copied and `BufferTooSmall` is returned. `stderr` may be null.
 *
 * # Safety
 * `result` must be a live handle, `metric` nul-terminated, `x` and `mean`
 * valid for `cap` elements, `stderr` null or valid for `cap` elements and
 * `len` a valid pointer.
 */
enum QrexStatus qrex_result_curve(const struct QrexResult *result,
                                  const char *metric,
                                  uint64_t *x,
                                  double *mean,
                                  double *stderr,
                                  size_t cap,
                                  size_t *len);

/**
 * Writes the result as CSV to `path`.
 *
 * # Safety
 * `result` must be a live handle and `path` nul-terminated.
 */
enum QrexStatus qrex_result_write_csv(const struct QrexResult *result, const char *path);

/**
 * Releases a result. Null is ignored.
 *
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void qrex_result_free(struct QrexResult *result);

/**
 * Parses a tabular model in the library's text format.
 *
 * # Safety
 * `model_text` must be nul-terminated and `out` a valid pointer.
 */
enum QrexStatus qrex_model_parse(const char *model_text, struct QrexModel **out);

/**
 * Number of states, or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qrex_model_num_states(const struct QrexModel *model);

/**
 * Number of actions, or 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qrex_model_num_actions(const struct QrexModel *model);

/**
 * Optimal Q-values by value iteration, row-major over (state, action),
 * into `q` of length `cap` (at least states × actions).
 *
 * # Safety
 * `model` must be a live handle and `q` valid for `cap` elements.
 */
enum QrexStatus qrex_model_optimal_q(const struct QrexModel *model,
                                     double tol,
                                     size_t max_iters,
                                     double *q,
                                     size_t cap);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void qrex_model_free(struct QrexModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QREX_H */
