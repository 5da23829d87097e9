#ifndef UNMIX_H
#define UNMIX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum UnmixStatus {
  /**
   * Success.
   */
  UNMIX_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  UNMIX_STATUS_NULL_ARGUMENT = 1,
  /**
   * Arguments or configuration failed validation.
   */
  UNMIX_STATUS_INVALID_INPUT = 2,
  /**
   * A numerical or I/O failure occurred while computing.
   */
  UNMIX_STATUS_RUNTIME_FAILURE = 3,
} UnmixStatus;

/**
 * An unmixing problem instance with a dense sensing matrix. Opaque;
 * create with `unmix_problem_new`, free with `unmix_problem_free`.
 */
typedef struct UnmixDenseProblem UnmixDenseProblem;

/**
 * Solver options for `unmix_problem_solve`. Zero-initialize and overwrite
 * selected fields, or pass null to use the defaults; any field that is
 * zero (or negative) falls back to its default.
 */
typedef struct UnmixSolverOptions {
  /**
   * Augmented Lagrangian penalty weight (default 1.0).
   */
  double rho;
  /**
   * Maximum outer (multiplier) iterations (default 100).
   */
  uintptr_t max_outer;
  /**
   * Maximum inner (proximal gradient) iterations (default 200).
   */
  uintptr_t max_inner;
  /**
   * Outer stopping tolerance on constraint residuals (default 1e-6).
   */
  double outer_tol;
  /**
   * Inner stopping tolerance on the objective decrease (default 1e-6).
   */
  double inner_tol;
} UnmixSolverOptions;

/**
 * Scalar results of a solve. The abundance vector itself is written to the
 * `z_out` argument of `unmix_problem_solve`.
 */
typedef struct UnmixSolveStats {
  /**
   * `||y_hat - A z||_2` at the returned point.
   */
  double residual_norm;
  /**
   * `||z - prior||_1` at the returned point.
   */
  double objective_l1;
  /**
   * Largest per-pixel deviation of the material sum from one.
   */
  double max_sum_violation;
  /**
   * Most negative abundance entry (0 if all nonnegative).
   */
  double max_negative_entry;
  /**
   * Outer iterations performed.
   */
  uintptr_t outer_iterations;
  /**
   * 1 if the constraint residuals met the outer tolerance.
   */
  int32_t converged;
  /**
   * 1 if the residual stalled above delta (likely infeasible problem).
   */
  int32_t infeasible_suspected;
} UnmixSolveStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the message for the most recent failure on this thread into `buf`
 * (NUL-terminated, truncated to `cap` bytes). Returns the full message
 * length in bytes, excluding the terminator. `buf` may be null to query
 * the length.
 */
uintptr_t unmix_last_error(char *buf, uintptr_t cap);

/**
 * Soft-thresholding: `out[i] = sign(x[i]) * max(|x[i]| - lambda, 0)`.
 * `x` and `out` hold `len` doubles and may alias.
 */
enum UnmixStatus unmix_soft_threshold(const double *x, uintptr_t len, double lambda, double *out);

/**
 * Euclidean projection of a complex vector onto the l2 ball of radius
 * `delta`. `x` and `out` hold `n_complex` interleaved complex doubles
 * (`2 * n_complex` doubles) and may alias.
 */
enum UnmixStatus unmix_project_l2_ball(const double *x,
                                       uintptr_t n_complex,
                                       double delta,
                                       double *out);

/**
 * Projection onto the nonnegative orthant: `out[i] = max(x[i], 0)`.
 */
enum UnmixStatus unmix_project_nonneg(const double *x, uintptr_t len, double *out);

/**
 * Projection onto the affine set "per-pixel material fractions sum to one".
 * `x` and `out` hold `n_pixels * n_materials` doubles, stacked
 * material-major.
 */
enum UnmixStatus unmix_project_sum_one(const double *x,
                                       uintptr_t n_pixels,
                                       uintptr_t n_materials,
                                       double *out);

/**
 * Create a dense unmixing problem.
 *
 * `a` is the `n_measurements x (n_pixels * n_materials)` sensing matrix,
 * row-major interleaved complex; `y_hat` holds `n_measurements` interleaved
 * complex measurements; `prior` holds `n_pixels * n_materials` doubles
 * (material-major). Returns null on invalid input (see `unmix_last_error`).
 */
struct UnmixDenseProblem *unmix_problem_new(uintptr_t n_measurements,
                                            uintptr_t n_pixels,
                                            uintptr_t n_materials,
                                            const double *a,
                                            const double *y_hat,
                                            const double *prior,
                                            double delta);

/**
 * Solve a problem created by `unmix_problem_new`.
 *
 * `options` may be null for defaults. `z_out` must hold
 * `n_pixels * n_materials` doubles and receives the abundances
 * (material-major). `stats_out` may be null.
 */
enum UnmixStatus unmix_problem_solve(const struct UnmixDenseProblem *problem,
                                     const struct UnmixSolverOptions *options,
                                     double *z_out,
                                     struct UnmixSolveStats *stats_out);

/**
 * Free a problem created by `unmix_problem_new`. Passing null is a no-op.
 */
void unmix_problem_free(struct UnmixDenseProblem *problem);

/**
 * Exact restricted isometry constant of order `s` for a dense
 * `rows x cols` complex matrix (row-major interleaved), by enumerating all
 * `s`-column submatrices. Fails if the subset count exceeds `cap`.
 */
enum UnmixStatus unmix_estimate_ric(const double *a,
                                    uintptr_t rows,
                                    uintptr_t cols,
                                    uintptr_t s,
                                    uint64_t cap,
                                    double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UNMIX_H */
