#ifndef SIGCOMP_H
#define SIGCOMP_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SigcompStatus {
  SIGCOMP_STATUS_OK = 0,
  SIGCOMP_STATUS_INVALID_ARGUMENT = 1,
  SIGCOMP_STATUS_NUMERICAL = 2,
  SIGCOMP_STATUS_PARSE = 3,
  SIGCOMP_STATUS_IO = 4,
  SIGCOMP_STATUS_NULL_POINTER = 5,
  SIGCOMP_STATUS_BUFFER_TOO_SMALL = 6,
  SIGCOMP_STATUS_PANIC = 7,
} SigcompStatus;

typedef enum SigcompSolver {
  SIGCOMP_SOLVER_LPA = 0,
  SIGCOMP_SOLVER_GLPA = 1,
  SIGCOMP_SOLVER_SGDM = 2,
  SIGCOMP_SOLVER_RMSPROP = 3,
  SIGCOMP_SOLVER_ADAM = 4,
} SigcompSolver;

typedef enum SigcompLoss {
  SIGCOMP_LOSS_QUADRATIC = 0,
  SIGCOMP_LOSS_ABSOLUTE = 1,
  SIGCOMP_LOSS_HINGE = 2,
} SigcompLoss;

/**
 * Opaque training or test set.
 */
typedef struct SigcompDataset SigcompDataset;

/**
 * Opaque result of a fit.
 */
typedef struct SigcompFit SigcompFit;

/**
 * Fit settings. Fill with [`sigcomp_options_default`] before changing fields.
 */
typedef struct SigcompOptions {
  enum SigcompSolver solver;
  enum SigcompLoss loss;
  /**
   * Hidden width.
   */
  size_t q;
  double t;
  double step_tol;
  size_t max_outer;
  double c;
  double tau;
  size_t max_backtracks;
  double rho;
  double eps;
  size_t admm_max_iters;
  double lr;
  double momentum;
  size_t iters;
  /**
   * Start from θ = 0 instead of a seeded uniform draw.
   */
  bool zero_init;
  double init_scale;
  uint64_t seed;
} SigcompOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *sigcomp_version(void);

/**
 * Message of the last failed call on this thread, or an empty string. The
 * pointer stays valid until the next library call on this thread.
 */
const char *sigcomp_last_error(void);

/**
 * # Safety
 * `out` must be null or point to writable memory for one `SigcompOptions`.
 */
enum SigcompStatus sigcomp_options_default(struct SigcompOptions *out);

/**
 * Builds a dataset from row-major `inputs` (`rows × cols`) and `rows` targets.
 * With `binary` set, targets must be -1 or +1.
 *
 * # Safety
 * `inputs` and `targets` must be valid for the stated lengths; `out` must be
 * a valid pointer to a handle slot.
 */
enum SigcompStatus sigcomp_dataset_new(const double *inputs,
                                       size_t rows,
                                       size_t cols,
                                       const double *targets,
                                       bool binary,
                                       struct SigcompDataset **out);

/**
 * Noise-free Franke training and test sets on Halton points.
 *
 * # Safety
 * `train` and `test` must be valid pointers to handle slots.
 */
enum SigcompStatus sigcomp_dataset_franke(size_t n_train,
                                          size_t n_test,
                                          struct SigcompDataset **train,
                                          struct SigcompDataset **test);

/**
 * # Safety
 * `data` must be null or a valid dataset handle.
 */
size_t sigcomp_dataset_rows(const struct SigcompDataset *data);

/**
 * # Safety
 * `data` must be null or a valid dataset handle.
 */
size_t sigcomp_dataset_cols(const struct SigcompDataset *data);

/**
 * # Safety
 * `data` must be null or a handle from this library not freed before.
 */
void sigcomp_dataset_free(struct SigcompDataset *data);

/**
 * Trains a network on `data`.
 *
 * # Safety
 * `data` must be a valid dataset handle, `opts` must point to initialized
 * options and `out` must be a valid pointer to a handle slot.
 */
enum SigcompStatus sigcomp_fit(const struct SigcompDataset *data,
                               const struct SigcompOptions *opts,
                               struct SigcompFit **out);

/**
 * Outer iterations taken; 0 for a null handle.
 *
 * # Safety
 * `fit` must be null or a valid fit handle.
 */
size_t sigcomp_fit_iterations(const struct SigcompFit *fit);

/**
 * Objective at θ*; NaN for a null handle.
 *
 * # Safety
 * `fit` must be null or a valid fit handle.
 */
double sigcomp_fit_objective(const struct SigcompFit *fit);

/**
 * Whether the step tolerance was met.
 *
 * # Safety
 * `fit` must be null or a valid fit handle.
 */
bool sigcomp_fit_converged(const struct SigcompFit *fit);

/**
 * Copies θ* into `out`. `written` receives the parameter count even when the
 * buffer is too small.
 *
 * # Safety
 * `fit` must be a valid fit handle; `out` must be valid for `capacity` writes;
 * `written` must be null or valid for one write.
 */
enum SigcompStatus sigcomp_fit_params(const struct SigcompFit *fit,
                                      double *out,
                                      size_t capacity,
                                      size_t *written);

/**
 * Copies the objective of every trace record (θ₀ first) into `out`.
 *
 * # Safety
 * Same contract as [`sigcomp_fit_params`].
 */
enum SigcompStatus sigcomp_fit_trace(const struct SigcompFit *fit,
                                     double *out,
                                     size_t capacity,
                                     size_t *written);

/**
 * Network outputs for row-major `inputs` (`rows × cols`), written to `out`
 * (`rows` values).
 *
 * # Safety
 * `fit` must be a valid fit handle; `inputs` valid for `rows·cols` reads and
 * `out` valid for `rows` writes.
 */
enum SigcompStatus sigcomp_fit_predict(const struct SigcompFit *fit,
                                       const double *inputs,
                                       size_t rows,
                                       size_t cols,
                                       double *out);

/**
 * # Safety
 * `fit` must be null or a handle from this library not freed before.
 */
void sigcomp_fit_free(struct SigcompFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGCOMP_H */
