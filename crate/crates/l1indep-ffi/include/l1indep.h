#ifndef L1INDEP_H
#define L1INDEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every `l1indep_*` entry point.
 */
typedef enum {
  /**
   * Success.
   */
  L1INDEP_OK = 0,
  /**
   * A required pointer argument was null.
   */
  L1INDEP_NULL_POINTER = 1,
  /**
   * The block structure is invalid (fewer than two blocks, zero dims, ...).
   */
  L1INDEP_BAD_SPEC = 2,
  /**
   * The data contain non-finite values or have the wrong shape.
   */
  L1INDEP_BAD_DATA = 3,
  /**
   * Too few observations for the requested block structure.
   */
  L1INDEP_TOO_FEW_OBS = 4,
  /**
   * A coordinate is degenerate (zero spread), so no bandwidth exists.
   */
  L1INDEP_DEGENERATE = 5,
  /**
   * A configuration value (alpha, bandwidth, resolution) is out of range.
   */
  L1INDEP_BAD_CONFIG = 6,
  /**
   * Internal numeric failure.
   */
  L1INDEP_INTERNAL = 7,
} l1indep_status;

/**
 * Opaque handle to a completed test run.
 */
typedef struct l1indep_result l1indep_result;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Run the full test (data-driven bandwidths, uniform kernel, asymptotic
 * calibration) and store a handle in `*out` on success.
 *
 * # Safety
 * `data` must point to `n * sum(dims)` doubles, `dims` to `p` sizes, and
 * `out` to a writable pointer slot.
 */
l1indep_status l1indep_run(const double *data,
                           size_t n,
                           const size_t *dims,
                           size_t p,
                           double alpha,
                           l1indep_result **out);

/**
 * Like [`l1indep_run`], but with caller-supplied bandwidths: `bandwidths`
 * points to `n_bandwidths` doubles, one per flat coordinate (pass null / 0
 * for data-driven selection).
 *
 * # Safety
 * See [`l1indep_run`]; `bandwidths` must be null or point to
 * `n_bandwidths` doubles.
 */
l1indep_status l1indep_run_fixed(const double *data,
                                 size_t n,
                                 const size_t *dims,
                                 size_t p,
                                 double alpha,
                                 const double *bandwidths,
                                 size_t n_bandwidths,
                                 l1indep_result **out);

/**
 * Release a result handle. Passing null is a no-op.
 *
 * # Safety
 * `result` must be null or a pointer previously returned through
 * [`l1indep_run`] / [`l1indep_run_fixed`], and must not be used afterwards.
 */
void l1indep_result_free(l1indep_result *result);

/**
 * Copy the per-coordinate bandwidths into `out` (capacity `cap`); writes
 * the coordinate count to `*len`.
 *
 * # Safety
 * `result` must be a live handle; `out` must have room for `cap` doubles;
 * `len` must be a writable slot.
 */
l1indep_status l1indep_result_bandwidths(const l1indep_result *result,
                                         double *out,
                                         size_t cap,
                                         size_t *len);

/**
 * Compute the asymptotic variance constant `sigma^2` for a block structure
 * under the uniform kernel. `resolution` of 0 selects a dimension-dependent
 * default.
 *
 * # Safety
 * `dims` must point to `p` sizes and `out` to a writable double.
 */
l1indep_status l1indep_sigma_sq(const size_t *dims, size_t p, size_t resolution, double *out);

/**
 * Library version as a static NUL-terminated string.
 */
const char *l1indep_version(void);

/**
 * Static description of a status code.
 */
const char *l1indep_strerror(l1indep_status code);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* L1INDEP_H */
