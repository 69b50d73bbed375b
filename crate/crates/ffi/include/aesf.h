#ifndef AESF_H
#define AESF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AesfStatus {
  AESF_STATUS_OK = 0,
  AESF_STATUS_ERROR = 1,
  AESF_STATUS_PARSE = 2,
  AESF_STATUS_TIE = 3,
  AESF_STATUS_UNSUPPORTED = 4,
  AESF_STATUS_DOMAIN = 5,
  AESF_STATUS_NULL_POINTER = 6,
} AesfStatus;

/**
 * Opaque dataset of (x) or (x, y) observations.
 */
typedef struct AesfDataset AesfDataset;

/**
 * Opaque data-generating model.
 */
typedef struct AesfModel AesfModel;

/**
 * Monte Carlo ESF result.
 */
typedef struct AesfMcEstimate {
  double value;
  double std_error;
  size_t replicates;
  size_t n;
  uint64_t seed;
  size_t resampled;
} AesfMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *aesf_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *aesf_version(void);

/**
 * Parses a model from its JSON description.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum AesfStatus aesf_model_from_json(const char *json, struct AesfModel **out_model);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`aesf_model_from_json`] and not be used afterwards.
 */
void aesf_model_free(struct AesfModel *model);

/**
 * Copies `n` observations into a new dataset. `ys` may be null for univariate data.
 *
 * # Safety
 * `xs` (and `ys` when not null) must point to `n` readable doubles.
 */
enum AesfStatus aesf_dataset_new(const double *xs,
                                 const double *ys,
                                 size_t n,
                                 struct AesfDataset **out_dataset);

/**
 * Releases a dataset; null is ignored.
 *
 * # Safety
 * `dataset` must come from [`aesf_dataset_new`] and not be used afterwards.
 */
void aesf_dataset_free(struct AesfDataset *dataset);

/**
 * Evaluates the named estimator on a dataset.
 *
 * # Safety
 * Pointers must be valid; `functional` NUL-terminated.
 */
enum AesfStatus aesf_estimate(const struct AesfDataset *dataset,
                              const char *functional_name,
                              double *out_value);

/**
 * Sensitivity function (n+1)·[R(F_{n+1}) − R(F_n)] of adding (x, y) to the dataset.
 *
 * # Safety
 * Pointers must be valid; `y` may be null for univariate functionals.
 */
enum AesfStatus aesf_sf(const struct AesfDataset *dataset,
                        const char *functional_name,
                        double x,
                        const double *y,
                        double *out_value);

/**
 * Monte Carlo expected sensitivity function at sample size `n`.
 *
 * # Safety
 * Pointers must be valid; `y` may be null for univariate functionals.
 */
enum AesfStatus aesf_esf_mc(const struct AesfModel *model,
                            const char *functional_name,
                            size_t n,
                            double x,
                            const double *y,
                            size_t replicates,
                            uint64_t seed,
                            struct AesfMcEstimate *out_estimate);

/**
 * Closed-form asymptotic expected sensitivity function at (x, y).
 *
 * # Safety
 * Pointers must be valid; `y` may be null for univariate functionals.
 */
enum AesfStatus aesf_closed_form(const struct AesfModel *model,
                                 const char *functional_name,
                                 double x,
                                 const double *y,
                                 double *out_value);

/**
 * Population value R(F) of the functional under the model.
 *
 * # Safety
 * Pointers must be valid.
 */
enum AesfStatus aesf_population_value(const struct AesfModel *model,
                                      const char *functional_name,
                                      double *out_value);

/**
 * Standard normal CDF.
 *
 * # Safety
 * `out_value` must be writable.
 */
enum AesfStatus aesf_normal_cdf(double z, double *out_value);

/**
 * Standard bivariate normal CDF P(X ≤ x, Y ≤ y) with correlation rho.
 *
 * # Safety
 * `out_value` must be writable.
 */
enum AesfStatus aesf_bvn_cdf(double x, double y, double rho, double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AESF_H */
