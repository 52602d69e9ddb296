#ifndef CONFORMAL_REACH_H
#define CONFORMAL_REACH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum CrStatus {
  CR_STATUS_OK = 0,
  CR_STATUS_NULL_POINTER = 1,
  /**
   * Bad argument or precondition (domain, sizes, budget).
   */
  CR_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Numerical failure, e.g. a singular moment matrix.
   */
  CR_STATUS_NUMERICAL = 3,
  /**
   * Malformed JSON or text.
   */
  CR_STATUS_PARSE = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  CR_STATUS_PANIC = 5,
} CrStatus;

/**
 * Calibrated reach-set estimate.
 */
typedef struct CrEstimate CrEstimate;

/**
 * Fitted score function.
 */
typedef struct CrModel CrModel;

/**
 * Transductive scoring context.
 */
typedef struct CrTransductive CrTransductive;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *cr_last_error_message(void);

/**
 * Release a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void cr_string_free(char *s);

/**
 * Fit a model of degree `degree` on `count` points of dimension `dim`.
 *
 * # Safety
 * `points` must hold `count * dim` doubles; `out` must be writable.
 */
enum CrStatus cr_model_fit(const double *points,
                           size_t count,
                           size_t dim,
                           size_t degree,
                           bool rescale,
                           double ridge,
                           struct CrModel **out);

/**
 * # Safety
 * `model` must be a live handle; `x` must hold `dim` doubles.
 */
enum CrStatus cr_model_score(const struct CrModel *model, const double *x, size_t dim, double *out);

/**
 * # Safety
 * `model` must be a live handle; free `*out` with [`cr_string_free`].
 */
enum CrStatus cr_model_to_json(const struct CrModel *model, char **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum CrStatus cr_model_from_json(const char *json, struct CrModel **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed. NULL is ignored.
 */
void cr_model_free(struct CrModel *model);

/**
 * Split-conformal calibration (rank 1) at failure probability `delta`.
 * The model is copied; the handle stays usable.
 *
 * # Safety
 * `model` must be a live handle; `points` must hold `count * dim` doubles.
 */
enum CrStatus cr_calibrate(const struct CrModel *model,
                           const double *points,
                           size_t count,
                           size_t dim,
                           double delta,
                           struct CrEstimate **out);

/**
 * Calibration tolerating up to `p` outliers, guaranteed at coverage error
 * `epsilon`.
 *
 * # Safety
 * As for [`cr_calibrate`].
 */
enum CrStatus cr_calibrate_robust(const struct CrModel *model,
                                  const double *points,
                                  size_t count,
                                  size_t dim,
                                  size_t p,
                                  double epsilon,
                                  struct CrEstimate **out);

/**
 * # Safety
 * `estimate` must be a live handle; `x` must hold `dim` doubles.
 */
enum CrStatus cr_estimate_contains(const struct CrEstimate *estimate,
                                   const double *x,
                                   size_t dim,
                                   bool *out);

/**
 * # Safety
 * `estimate` must be a live handle.
 */
enum CrStatus cr_estimate_threshold(const struct CrEstimate *estimate, double *out);

/**
 * Coverage error and confidence of the estimate's guarantee.
 *
 * # Safety
 * `estimate` must be a live handle.
 */
enum CrStatus cr_estimate_guarantee(const struct CrEstimate *estimate,
                                    double *epsilon,
                                    double *confidence);

/**
 * # Safety
 * `estimate` must be a live handle; free `*out` with [`cr_string_free`].
 */
enum CrStatus cr_estimate_to_json(const struct CrEstimate *estimate, char **out);

/**
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum CrStatus cr_estimate_from_json(const char *json, struct CrEstimate **out);

/**
 * # Safety
 * `estimate` must come from this library and not have been freed. NULL is ignored.
 */
void cr_estimate_free(struct CrEstimate *estimate);

/**
 * Build a transductive context over `count` training points.
 *
 * # Safety
 * `points` must hold `count * dim` doubles; `out` must be writable.
 */
enum CrStatus cr_transductive_new(const double *points,
                                  size_t count,
                                  size_t dim,
                                  size_t degree,
                                  bool rescale,
                                  double ridge,
                                  struct CrTransductive **out);

/**
 * Transductive p-value `count / total` of `x`.
 *
 * # Safety
 * `ctx` must be a live handle; `x` must hold `dim` doubles.
 */
enum CrStatus cr_transductive_p_value(const struct CrTransductive *ctx,
                                      const double *x,
                                      size_t dim,
                                      size_t *count,
                                      size_t *total);

/**
 * # Safety
 * `ctx` must come from this library and not have been freed. NULL is ignored.
 */
void cr_transductive_free(struct CrTransductive *ctx);

/**
 * `ε = 1 − δ^{1/N}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CrStatus cr_split_epsilon(size_t n_cal, double delta, double *out);

/**
 * `δ = (1 − ε)^N`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CrStatus cr_split_delta(size_t n_cal, double epsilon, double *out);

/**
 * Confidence of the rank-(p+1) threshold at coverage error `epsilon`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CrStatus cr_robust_confidence(size_t n_cal, size_t p, double epsilon, double *out);

/**
 * Baseline sample-complexity ε for `n_samples` points.
 *
 * # Safety
 * `out` must be writable.
 */
enum CrStatus cr_baseline_epsilon(size_t n_samples,
                                  size_t dimension,
                                  size_t degree,
                                  double delta,
                                  double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONFORMAL_REACH_H */
