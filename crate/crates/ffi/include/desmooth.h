#ifndef DESMOOTH_H
#define DESMOOTH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DsStatus {
  DS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  DS_STATUS_NULL_POINTER = 1,
  DS_STATUS_CONFIG = 2,
  DS_STATUS_DATA = 3,
  DS_STATUS_NUMERICAL = 4,
  DS_STATUS_PANIC = 5,
} DsStatus;

typedef enum DsKernel {
  DS_KERNEL_GAUSSIAN = 0,
  DS_KERNEL_EPANECHNIKOV = 1,
} DsKernel;

/**
 * Opaque dataset handle.
 */
typedef struct DsDataset DsDataset;

/**
 * Opaque fit handle.
 */
typedef struct DsFit DsFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next library call on the same thread.
 */
const char *ds_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ds_version(void);

/**
 * Copies `n` observations into a new dataset, sorted by x.
 *
 * # Safety
 * `xs` and `ys` must point to `n` readable doubles; `out` must be writable.
 */
enum DsStatus ds_dataset_new(const double *xs, const double *ys, size_t n, struct DsDataset **out);

/**
 * # Safety
 * `dataset` must come from [`ds_dataset_new`] and not be freed twice.
 */
void ds_dataset_free(struct DsDataset *dataset);

/**
 * # Safety
 * `dataset` must be a live handle or null; `out` must be writable.
 */
enum DsStatus ds_dataset_len(const struct DsDataset *dataset, size_t *out);

/**
 * Half the median spacing of the sorted design.
 *
 * # Safety
 * `dataset` must be a live handle or null; `out` must be writable.
 */
enum DsStatus ds_reference_bandwidth(const struct DsDataset *dataset, double *out);

/**
 * Fits `method` (for example `"de1-2"` or `"ll"`) on `grid`.
 *
 * Pass NaN for `lambda` when the method does not use it. Parametric
 * methods ignore `kernel` and `h`.
 *
 * # Safety
 * `method` must be a NUL-terminated string, `grid` must point to
 * `grid_len` doubles and `out` must be writable.
 */
enum DsStatus ds_fit(const struct DsDataset *dataset,
                     const char *method,
                     double lambda,
                     enum DsKernel kernel,
                     double h,
                     const double *grid,
                     size_t grid_len,
                     struct DsFit **out);

/**
 * # Safety
 * `fit` must come from [`ds_fit`] and not be freed twice.
 */
void ds_fit_free(struct DsFit *fit);

/**
 * # Safety
 * `fit` must be a live handle or null; `out` must be writable.
 */
enum DsStatus ds_fit_len(const struct DsFit *fit, size_t *out);

/**
 * Copies fitted values (NaN where degenerate) and degeneracy flags.
 * `degenerate` may be null.
 *
 * # Safety
 * `values` must hold `len` doubles and `degenerate`, when not null, `len`
 * bytes; `len` must equal the fit length.
 */
enum DsStatus ds_fit_values(const struct DsFit *fit,
                            double *values,
                            uint8_t *degenerate,
                            size_t len);

/**
 * Leave-one-out CV over `grid`; writes the selected bandwidth and, when
 * `scores` is not null, the score of every candidate.
 *
 * # Safety
 * `grid` must hold `grid_len` doubles, `scores` (if not null) room for
 * `grid_len` doubles, and `h_star` must be writable.
 */
enum DsStatus ds_loocv_select(const struct DsDataset *dataset,
                              const char *method,
                              double lambda,
                              enum DsKernel kernel,
                              const double *grid,
                              size_t grid_len,
                              double *scores,
                              double *h_star);

/**
 * Asymptotically optimal DE1-k bandwidth under `g(x) = g0 e^{λx}`.
 * Pass NaN for `fprime_x0` when unknown (odd k do not use it).
 *
 * # Safety
 * `out` must be writable.
 */
enum DsStatus ds_optimal_bandwidth(size_t k,
                                   double sigma2,
                                   size_t n,
                                   double f_x0,
                                   double fprime_x0,
                                   double lambda,
                                   double x0,
                                   double g0,
                                   enum DsKernel kernel,
                                   double *out);

/**
 * Nonlinear least squares for `g(x) = g(a) e^{λ(x − a)}` with `a` the
 * smallest x. Writes `g(a)`, `λ` and whether the iteration converged.
 *
 * # Safety
 * The output pointers must be writable.
 */
enum DsStatus ds_nls_fit(const struct DsDataset *dataset,
                         double *g_a,
                         double *lambda,
                         bool *converged);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DESMOOTH_H */
