#ifndef ROBSUB_H
#define ROBSUB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RobsubLoss {
  ROBSUB_LOSS_ABSOLUTE = 0,
  ROBSUB_LOSS_HUBER = 1,
  ROBSUB_LOSS_QUANTILE = 2,
  ROBSUB_LOSS_SQUARE = 3,
} RobsubLoss;

typedef enum RobsubStatus {
  ROBSUB_STATUS_OK = 0,
  ROBSUB_STATUS_NULL_POINTER = 1,
  ROBSUB_STATUS_PARAMETER = 2,
  ROBSUB_STATUS_INPUT = 3,
  ROBSUB_STATUS_STATE = 4,
  ROBSUB_STATUS_DIVERGED = 5,
  ROBSUB_STATUS_IO = 6,
  ROBSUB_STATUS_PARSE = 7,
  ROBSUB_STATUS_PANIC = 8,
} RobsubStatus;

typedef struct RobsubLowrankProblem RobsubLowrankProblem;

typedef struct RobsubSparseProblem RobsubSparseProblem;

/**
 * Solver options. Obtain defaults from [`robsub_default_options`].
 */
typedef struct RobsubSolveOptions {
  /**
   * Sparsity for IHT, rank for RsGrad.
   */
  size_t level;
  enum RobsubLoss loss;
  /**
   * Huber threshold or quantile level; ignored by the other losses.
   */
  double delta;
  /**
   * Nonzero: never switch to the constant phase-two stepsize.
   */
  int32_t decay_only;
  /**
   * Zero keeps the solver default.
   */
  size_t max_iters_phase1;
  /**
   * Zero keeps the solver default.
   */
  size_t max_iters_phase2;
} RobsubSolveOptions;

typedef struct RobsubSolveInfo {
  size_t iterations;
  /**
   * Nonzero when phase two was entered.
   */
  int32_t switched;
  /**
   * Phase-one steps taken before the switch.
   */
  size_t switch_iter;
  double eta0;
  double final_objective;
} RobsubSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *robsub_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *robsub_version(void);

/**
 * Defaults: absolute loss, two-phase schedule, solver iteration budgets.
 */
struct RobsubSolveOptions robsub_default_options(size_t level);

/**
 * Copies an `n × d` row-major design and `n` responses into a new problem.
 *
 * # Safety
 * `design` must point to `n*d` doubles, `responses` to `n` doubles and
 * `out` to writable storage for one pointer.
 */
enum RobsubStatus robsub_sparse_problem_new(const double *design,
                                            const double *responses,
                                            size_t n,
                                            size_t d,
                                            struct RobsubSparseProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`robsub_sparse_problem_new`]
 * that has not been freed.
 */
void robsub_sparse_problem_free(struct RobsubSparseProblem *problem);

/**
 * Copies `n` stacked `d1×d2` measurements and `n` responses into a new
 * problem.
 *
 * # Safety
 * `measurements` must point to `n*d1*d2` doubles, `responses` to `n`
 * doubles and `out` to writable storage for one pointer.
 */
enum RobsubStatus robsub_lowrank_problem_new(const double *measurements,
                                             const double *responses,
                                             size_t n,
                                             size_t d1,
                                             size_t d2,
                                             struct RobsubLowrankProblem **out);

/**
 * # Safety
 * `problem` must be null or a handle from [`robsub_lowrank_problem_new`]
 * that has not been freed.
 */
void robsub_lowrank_problem_free(struct RobsubLowrankProblem *problem);

/**
 * Fits a sparse vector from zero by IHT; writes `d` coefficients to
 * `beta_out`. `info` may be null.
 *
 * # Safety
 * `problem` and `options` must be valid; `beta_out` must hold `d` doubles.
 */
enum RobsubStatus robsub_iht_solve(const struct RobsubSparseProblem *problem,
                                   const struct RobsubSolveOptions *options,
                                   double *beta_out,
                                   struct RobsubSolveInfo *info);

/**
 * Fits a rank-`level` matrix by RsGrad from a spectral initialization
 * (identity design covariance); writes the `d1×d2` estimate row-major to
 * `m_out`. `info` may be null.
 *
 * # Safety
 * `problem` and `options` must be valid; `m_out` must hold `d1*d2` doubles.
 */
enum RobsubStatus robsub_rsgrad_solve(const struct RobsubLowrankProblem *problem,
                                      const struct RobsubSolveOptions *options,
                                      double *m_out,
                                      struct RobsubSolveInfo *info);

/**
 * Keeps the `k` largest-magnitude entries of `v` (ties to the lower index)
 * and zeroes the rest. `out` may alias `v`.
 *
 * # Safety
 * `v` and `out` must each hold `len` doubles.
 */
enum RobsubStatus robsub_hard_threshold(const double *v, size_t len, size_t k, double *out);

/**
 * `ρ(u)` for the given loss.
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum RobsubStatus robsub_loss_value(enum RobsubLoss loss, double delta, double u, double *out);

/**
 * The subgradient `ψ(u)` used by the solvers (zero at kinks).
 *
 * # Safety
 * `out` must point to one writable double.
 */
enum RobsubStatus robsub_loss_subgrad(enum RobsubLoss loss, double delta, double u, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROBSUB_H */
