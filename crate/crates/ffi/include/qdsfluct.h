#ifndef QDSFLUCT_H
#define QDSFLUCT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QdsStatus {
  QDS_STATUS_OK = 0,
  QDS_STATUS_NULL_POINTER = 1,
  /**
   * Invalid input or failed hypothesis.
   */
  QDS_STATUS_INVALID = 2,
  QDS_STATUS_NUMERICAL = 3,
  QDS_STATUS_IO = 4,
  /**
   * A string argument is not UTF-8.
   */
  QDS_STATUS_UTF8 = 5,
  /**
   * An output buffer has the wrong length.
   */
  QDS_STATUS_BUFFER_SIZE = 6,
  QDS_STATUS_PANIC = 7,
} QdsStatus;

/**
 * Opaque model handle.
 */
typedef struct QdsModel QdsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a model from JSON text. On success `*out` owns a new handle.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QdsStatus qds_model_from_json(const char *json, struct QdsModel **out);

/**
 * Builds a model from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum QdsStatus qds_model_from_file(const char *path, struct QdsModel **out);

/**
 * Releases a handle; null is ignored.
 *
 * # Safety
 * `model` must come from a constructor above and not be used afterwards.
 */
void qds_model_free(struct QdsModel *model);

/**
 * Hilbert-space dimension, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qds_model_dim(const struct QdsModel *model);

/**
 * Number of reservoirs, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qds_model_reservoirs(const struct QdsModel *model);

/**
 * e(alpha) for one deformation vector of length `len` (the number of
 * reservoirs).
 *
 * # Safety
 * `alpha` must point to `len` doubles and `out` to one double.
 */
enum QdsStatus qds_cgf(const struct QdsModel *model, const double *alpha, size_t len, double *out);

/**
 * Steady state, row-major real and imaginary parts of length dim².
 *
 * # Safety
 * `re` and `im` must point to `len` writable doubles each.
 */
enum QdsStatus qds_steady_state(const struct QdsModel *model, double *re, double *im, size_t len);

/**
 * Mean entropy rates, one per reservoir.
 *
 * # Safety
 * `out` must point to `len` writable doubles.
 */
enum QdsStatus qds_mean_entropy_rates(const struct QdsModel *model, double *out, size_t len);

/**
 * Steady-state entropy production rate.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum QdsStatus qds_entropy_production_rate(const struct QdsModel *model, double *out);

/**
 * max |e(1 − alpha) − e(alpha)| over `points` deformation vectors stored
 * row-major in `grid` (points × reservoirs doubles).
 *
 * # Safety
 * `grid` must point to `points * reservoirs` doubles and `out` to one.
 */
enum QdsStatus qds_es_residual(const struct QdsModel *model,
                               const double *grid,
                               size_t points,
                               double *out);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *qds_last_error_message(void);

/**
 * Library version, a static string.
 */
const char *qds_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QDSFLUCT_H */
