#ifndef WIKS_H
#define WIKS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum WiksStatus {
  WIKS_STATUS_OK = 0,
  WIKS_STATUS_NULL_POINTER = 1,
  WIKS_STATUS_INVALID_PARAMETER = 2,
  WIKS_STATUS_INVALID_INPUT = 3,
  WIKS_STATUS_DEGENERATE = 4,
  WIKS_STATUS_RESOURCE_LIMIT = 5,
  WIKS_STATUS_CONFIG = 6,
  WIKS_STATUS_IO = 7,
  WIKS_STATUS_PANIC = 8,
} WiksStatus;

/**
 * Opaque tester: a prior plus Monte Carlo settings.
 */
typedef struct WiksTester WiksTester;

/**
 * Monte Carlo estimate of the index.
 */
typedef struct WiksEstimateResult {
  double value;
  double mc_std_error;
  size_t draws;
  /**
   * Draws whose stick-breaking hit the atom cap.
   */
  size_t truncation_flag_count;
} WiksEstimateResult;

/**
 * Statistic and p-value of a classical test.
 */
typedef struct WiksTestResult {
  double statistic;
  double p_value;
} WiksTestResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null if none. The
 * pointer stays valid until the next failing call on this thread.
 */
const char *wiks_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *wiks_version(void);

/**
 * Creates a tester. `base` is a model string such as `"normal(0,1)"` and
 * `weight` a weight string such as `"power(4)"`; null selects the
 * defaults. `draws` is the number of posterior draw pairs.
 *
 * # Safety
 * String arguments must be null or NUL-terminated; `out` must be writable.
 */
enum WiksStatus wiks_tester_new(double concentration,
                                const char *base,
                                const char *weight,
                                size_t draws,
                                struct WiksTester **out);

/**
 * Frees a tester; null is ignored.
 *
 * # Safety
 * `tester` must come from [`wiks_tester_new`] and not be used afterwards.
 */
void wiks_tester_free(struct WiksTester *tester);

/**
 * Sets the stick-breaking truncation tolerance and atom cap.
 *
 * # Safety
 * `tester` must be a live tester.
 */
enum WiksStatus wiks_tester_set_truncation(struct WiksTester *tester, double eps, size_t max_atoms);

/**
 * Estimates the index of two univariate samples.
 *
 * # Safety
 * `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
 */
enum WiksStatus wiks_tester_estimate(const struct WiksTester *tester,
                                     const double *x,
                                     size_t n,
                                     const double *y,
                                     size_t m,
                                     uint64_t seed,
                                     struct WiksEstimateResult *out);

/**
 * Estimates the index of two bivariate samples; the base measure is the
 * product of two copies of the tester's base.
 *
 * # Safety
 * `x` and `y` must point to `2 n` and `2 m` doubles; `out` must be
 * writable.
 */
enum WiksStatus wiks_tester_estimate_bivariate(const struct WiksTester *tester,
                                               const double *x,
                                               size_t n,
                                               const double *y,
                                               size_t m,
                                               uint64_t seed,
                                               struct WiksEstimateResult *out);

/**
 * Calibrates a threshold by simulating `replicates` null data sets of
 * sizes `n`, `m` from `null_model` (null selects the tester's base).
 * `budget_cap` bounds `replicates * draws`; 0 selects the default.
 *
 * # Safety
 * `null_model` must be null or NUL-terminated; `threshold` must be
 * writable.
 */
enum WiksStatus wiks_tester_calibrate(const struct WiksTester *tester,
                                      size_t n,
                                      size_t m,
                                      size_t replicates,
                                      double alpha,
                                      const char *null_model,
                                      uint64_t budget_cap,
                                      uint64_t seed,
                                      double *threshold);

/**
 * Bayes threshold `c1 / (c1 + c0)` for losses `c0` (wrong acceptance)
 * and `c1` (wrong rejection).
 *
 * # Safety
 * `out` must be writable.
 */
enum WiksStatus wiks_threshold_from_losses(double c0, double c1, double *out);

/**
 * Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
 *
 * # Safety
 * `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
 */
enum WiksStatus wiks_ks_test(const double *x,
                             size_t n,
                             const double *y,
                             size_t m,
                             struct WiksTestResult *out);

/**
 * Wilcoxon rank-sum test, normal approximation; the statistic is the
 * Mann-Whitney `U` of `x`.
 *
 * # Safety
 * `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
 */
enum WiksStatus wiks_wilcoxon_test(const double *x,
                                   size_t n,
                                   const double *y,
                                   size_t m,
                                   struct WiksTestResult *out);

/**
 * Supremum distance between the empirical CDFs shrunk by `k`.
 *
 * # Safety
 * `x` and `y` must point to `n` and `m` doubles; `out` must be writable.
 */
enum WiksStatus wiks_z_statistic(const double *x,
                                 size_t n,
                                 const double *y,
                                 size_t m,
                                 double k,
                                 double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WIKS_H */
