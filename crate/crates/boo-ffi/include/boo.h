/* C interface to the boo global-optimisation library. */

#ifndef BOO_H
#define BOO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Kernel hyperparameter policy selector for [`BooConfig`].
 */
typedef enum BooHyper {
  /**
   * Periodic maximum-likelihood refits (the default).
   */
  BOO_HYPER_MLE = 0,
  /**
   * Dimension-scaled fixed kernel, never refit.
   */
  BOO_HYPER_FIXED = 1,
} BooHyper;

/**
 * Outcome of a C-interface call. Anything other than `Ok` leaves an
 * explanation in [`boo_last_error`].
 */
typedef enum BooStatus {
  /**
   * Success.
   */
  BOO_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  BOO_STATUS_NULL_POINTER = 1,
  /**
   * A string was not valid UTF-8.
   */
  BOO_STATUS_INVALID_UTF8 = 2,
  /**
   * A configuration or argument value was rejected.
   */
  BOO_STATUS_INVALID_ARGUMENT = 3,
  /**
   * The benchmark name is not in the registry.
   */
  BOO_STATUS_UNKNOWN_FUNCTION = 4,
  /**
   * `ask` was called after the evaluation budget was consumed.
   */
  BOO_STATUS_BUDGET_EXHAUSTED = 5,
  /**
   * The call violated the ask/tell protocol (wrong point echoed,
   * tell without a pending ask, or tell after completion).
   */
  BOO_STATUS_PROTOCOL = 6,
  /**
   * An internal numerical failure, e.g. an ill-conditioned Gram matrix.
   */
  BOO_STATUS_RUNTIME = 7,
  /**
   * An internal panic was caught at the boundary.
   */
  BOO_STATUS_PANIC = 8,
} BooStatus;

/**
 * Opaque optimiser handle; create with [`boo_new`], release with
 * [`boo_free`].
 */
typedef struct BooOptimizer BooOptimizer;

/**
 * Run configuration. Obtain defaults from [`boo_config_default`] and
 * override fields as needed.
 */
typedef struct BooConfig {
  /**
   * Maximum number of true objective evaluations (excluding `n_init`).
   */
  uint64_t budget;
  /**
   * Per-dimension split count; 0 selects the budget-derived scheme.
   */
  uint32_t scheme_a;
  /**
   * Number of dimensions split per expansion; 0 selects the
   * budget-derived scheme.
   */
  uint32_t scheme_b;
  /**
   * Confidence-schedule failure probability in (0, 1).
   */
  double eta;
  /**
   * Budget-exempt random initial design points for the GP methods.
   */
  uint64_t n_init;
  /**
   * Seed for every random choice the optimiser makes.
   */
  uint64_t seed;
  /**
   * Kernel hyperparameter policy.
   */
  enum BooHyper hyper;
} BooConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent error on the calling thread, as a
 * NUL-terminated string. Empty before any failure. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *boo_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *boo_version(void);

/**
 * Default configuration for `budget` evaluations: budget-derived
 * partitioning, eta 0.05, no initial design, MLE hyperparameters, seed 0.
 */
struct BooConfig boo_config_default(uint64_t budget);

/**
 * Creates an optimiser over the box `[lower[d], upper[d]]` for
 * `d < dim`. `algorithm` is one of `"boo"`, `"soo"`, `"bamsoo"`,
 * `"gp_ucb"`. On success writes the handle to `out` and returns `Ok`;
 * on failure `*out` is untouched.
 *
 * # Safety
 * `algorithm` must be a readable NUL-terminated string, `lower` and
 * `upper` readable arrays of length `dim`, and `out` writable.
 */
enum BooStatus boo_new(const char *algorithm,
                       const double *lower,
                       const double *upper,
                       size_t dim,
                       const struct BooConfig *config,
                       struct BooOptimizer **out);

/**
 * Releases a handle. Null is accepted and ignored.
 *
 * # Safety
 * `handle` must be null or a pointer from [`boo_new`] not yet freed.
 */
void boo_free(struct BooOptimizer *handle);

/**
 * Writes the next point to evaluate into `point` (length `dim`). Asking
 * again before telling returns the same point. Fails with
 * `BudgetExhausted` once [`boo_is_done`] is true.
 *
 * # Safety
 * `handle` must be a live handle from [`boo_new`]; `point` must be
 * writable for `dim` doubles.
 */
enum BooStatus boo_ask(struct BooOptimizer *handle, double *point, size_t dim);

/**
 * Reports the objective value of the last asked point. `point` must echo
 * the asked coordinates bit-exactly.
 *
 * # Safety
 * `handle` must be a live handle from [`boo_new`]; `point` must be
 * readable for `dim` doubles.
 */
enum BooStatus boo_tell(struct BooOptimizer *handle, const double *point, size_t dim, double value);

/**
 * True once the run has consumed its budget or converged; `ask` will not
 * produce further points. Null handles read as done.
 *
 * # Safety
 * `handle` must be null or a live handle from [`boo_new`].
 */
bool boo_is_done(const struct BooOptimizer *handle);

/**
 * Number of true objective evaluations recorded so far (initial design
 * included, memoised replays excluded).
 *
 * # Safety
 * `handle` must be null (returns 0) or a live handle from [`boo_new`].
 */
uint64_t boo_evaluations(const struct BooOptimizer *handle);

/**
 * Writes the best observed value to `best_value` and, when `best_point`
 * is non-null, the evaluated point attaining it (length `dim`). Fails
 * with `Runtime` before the first evaluation.
 *
 * # Safety
 * `handle` must be a live handle from [`boo_new`]; `best_value` must be
 * writable; `best_point` must be null or writable for `dim` doubles.
 */
enum BooStatus boo_best(const struct BooOptimizer *handle,
                        double *best_value,
                        double *best_point,
                        size_t dim);

/**
 * Number of dimensions of registry benchmark `name`, written to `out`.
 *
 * # Safety
 * `name` must be a readable NUL-terminated string; `out` writable.
 */
enum BooStatus boo_benchmark_dim(const char *name, size_t *out);

/**
 * Writes the benchmark's box bounds into `lower` and `upper` (length
 * `dim` each, as reported by [`boo_benchmark_dim`]).
 *
 * # Safety
 * `name` must be a readable NUL-terminated string; `lower` and `upper`
 * writable for `dim` doubles.
 */
enum BooStatus boo_benchmark_bounds(const char *name, double *lower, double *upper, size_t dim);

/**
 * Evaluates registry benchmark `name` at raw-domain point `x` and writes
 * the value to `out`.
 *
 * # Safety
 * `name` must be a readable NUL-terminated string; `x` readable for
 * `dim` doubles; `out` writable.
 */
enum BooStatus boo_benchmark_eval(const char *name, const double *x, size_t dim, double *out);

/**
 * Writes the benchmark's reference maximum value to `out`.
 *
 * # Safety
 * `name` must be a readable NUL-terminated string; `out` writable.
 */
enum BooStatus boo_benchmark_f_star(const char *name, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BOO_H */
