#ifndef RISKRATIO_H
#define RISKRATIO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RrStatus {
  RR_STATUS_OK = 0,
  RR_STATUS_NULL_POINTER = 1,
  RR_STATUS_INVALID_ARGUMENT = 2,
  RR_STATUS_RUNTIME = 3,
  RR_STATUS_IO = 4,
  RR_STATUS_PANIC = 5,
} RrStatus;

typedef enum RrMethod {
  RR_METHOD_NEYMAN = 0,
  RR_METHOD_HT = 1,
  RR_METHOD_IPW = 2,
  RR_METHOD_G = 3,
  RR_METHOD_OS = 4,
  RR_METHOD_AIPW = 5,
} RrMethod;

typedef enum RrNuisance {
  RR_NUISANCE_PARAMETRIC = 0,
  RR_NUISANCE_FOREST = 1,
} RrNuisance;

typedef enum RrCiStyle {
  RR_CI_STYLE_WALD = 0,
  RR_CI_STYLE_LOG_DELTA = 1,
  RR_CI_STYLE_KATZ = 2,
} RrCiStyle;

/**
 * Opaque dataset handle.
 */
typedef struct RrDataset RrDataset;

typedef struct RrEstimateOptions {
  enum RrMethod method;
  enum RrNuisance nuisance;
  /**
   * Cross-fitting folds (one-step and AIPW).
   */
  size_t folds;
  double alpha;
  enum RrCiStyle ci_style;
  /**
   * Propensity clipping level.
   */
  double eta;
  uint64_t seed;
  /**
   * Known treatment probability for Horvitz-Thompson.
   */
  double design_e;
  size_t n_trees;
  size_t min_leaf;
} RrEstimateOptions;

/**
 * Fields without a value (degenerate point, no variance) are NaN.
 */
typedef struct RrResult {
  double point;
  double v_hat;
  double se;
  double ci_lower;
  double ci_upper;
  size_t n;
  bool degenerate;
  bool assumes_randomization;
} RrResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *rr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rr_version(void);

/**
 * Builds a dataset from row-major covariates (`n * p` values), a 0/1
 * treatment vector and outcomes, all of length `n`.
 *
 * # Safety
 * `x` must point to `n * p` doubles (may be null when `p == 0`), `t` and
 * `y` to `n` elements each, and `out` must be writable.
 */
enum RrStatus rr_dataset_new(const double *x,
                             size_t n,
                             size_t p,
                             const uint8_t *t,
                             const double *y,
                             struct RrDataset **out);

/**
 * Loads a CSV with columns `x1..xp, t, y`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum RrStatus rr_dataset_load_csv(const char *path, struct RrDataset **out);

/**
 * Releases a dataset. Null is a no-op.
 *
 * # Safety
 * `d` must come from this library and not be used afterwards.
 */
void rr_dataset_free(struct RrDataset *d);

/**
 * Number of rows, or 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t rr_dataset_n(const struct RrDataset *d);

/**
 * Number of covariates, or 0 for a null handle.
 *
 * # Safety
 * `d` must be null or a live handle.
 */
size_t rr_dataset_p(const struct RrDataset *d);

struct RrEstimateOptions rr_estimate_options_default(void);

/**
 * Estimates the risk ratio of `d` and fills `out`.
 *
 * # Safety
 * `d` must be a live handle, `opts` readable (null means defaults) and
 * `out` writable.
 */
enum RrStatus rr_estimate(const struct RrDataset *d,
                          const struct RrEstimateOptions *opts,
                          struct RrResult *out);

/**
 * True risk ratio of a named synthetic design. `std_error` may be null;
 * it receives NaN when the value is exact.
 *
 * # Safety
 * `dgp` must be a NUL-terminated string, `value` writable.
 */
enum RrStatus rr_true_rr(const char *dgp,
                         uint64_t draws,
                         uint64_t seed,
                         double *value,
                         double *std_error);

/**
 * Draws `n` rows from a named synthetic design.
 *
 * # Safety
 * `dgp` must be a NUL-terminated string and `out` writable.
 */
enum RrStatus rr_simulate(const char *dgp,
                          size_t n,
                          uint64_t seed,
                          double noise_sd,
                          struct RrDataset **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKRATIO_H */
