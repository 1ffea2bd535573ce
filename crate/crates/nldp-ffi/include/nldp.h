#ifndef NLDP_H
#define NLDP_H

/* Generated from the nldp-ffi crate source. Regenerate with cargo build; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible entry point. Values mirror the
 * CLI exit codes.
 */
enum NldpStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  NLDP_STATUS_OK = 0,
  /**
   * Bad configuration, argument, or precondition.
   */
  NLDP_STATUS_VALIDATION = 2,
  /**
   * The simulation itself failed (budget exhaustion, singular system).
   */
  NLDP_STATUS_SIMULATION = 3,
  /**
   * A statistical or deterministic gate did not pass.
   */
  NLDP_STATUS_CHECK = 4,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum NldpStatus NldpStatus;
#else
typedef int32_t NldpStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Opaque handle holding a parsed problem plus its simulation settings.
 */
typedef struct NldpProblem NldpProblem;

/**
 * Summary statistics for one start point. All averages are over the
 * paths that exited; `nonexit_count` paths were dropped.
 */
typedef struct NldpSolveStats {
  /**
   * Monte Carlo estimate of the solution value.
   */
  double mean;
  /**
   * Standard error of the mean.
   */
  double std_error;
  /**
   * Lower end of the 95% normal confidence interval.
   */
  double ci_lo;
  /**
   * Upper end of the 95% normal confidence interval.
   */
  double ci_hi;
  /**
   * Average first-exit time.
   */
  double mean_exit_time;
  /**
   * Average number of redistribution jumps per path.
   */
  double mean_jumps;
  /**
   * Paths contributing to the averages.
   */
  uint64_t n_paths;
  /**
   * Paths that exhausted the step budget and were excluded.
   */
  uint64_t nonexit_count;
} NldpSolveStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *nldp_version(void);

/**
 * Copy the current thread's last error message into `buf`, NUL-terminated
 * and truncated to `cap` bytes. Returns the full message length in bytes
 * (excluding the NUL); 0 means no pending error. Passing a null `buf` or
 * zero `cap` only queries the length.
 *
 * # Safety
 * `buf`, when non-null, must point to `cap` writable bytes.
 */
size_t nldp_last_error(char *buf, size_t cap);

/**
 * Parse a JSON problem configuration (the same schema the CLI's
 * `--config` file uses) and return a new handle, or null on failure with
 * the message available through [`nldp_last_error`].
 *
 * # Safety
 * `json` must be a valid NUL-terminated string.
 */
struct NldpProblem *nldp_problem_from_json(const char *json);

/**
 * Free a handle returned by [`nldp_problem_from_json`]. Null is a no-op.
 *
 * # Safety
 * `p` must be a pointer returned by this library that has not been freed.
 */
void nldp_problem_free(struct NldpProblem *p);

/**
 * Spatial dimension of the problem, or -1 for a null handle.
 *
 * # Safety
 * `p` must be null or a live handle from this library.
 */
int32_t nldp_problem_dim(const struct NldpProblem *p);

/**
 * Master seed declared in the configuration (0 if absent). Pass it to
 * [`nldp_solve_at`] to reproduce what the CLI would compute.
 *
 * # Safety
 * `p` must be a live handle from this library.
 */
uint64_t nldp_problem_default_seed(const struct NldpProblem *p);

/**
 * Override the base time step for subsequent solves on this handle.
 *
 * # Safety
 * `p` must be a live handle; no other thread may use the handle during
 * the call.
 */
NldpStatus nldp_problem_set_dt(struct NldpProblem *p, double dt);

/**
 * Run the sampled coefficient and domain checks on the problem. Returns
 * `NLDP_STATUS_VALIDATION` with a message listing the first failure if
 * the problem is rejected.
 *
 * # Safety
 * `p` must be a live handle from this library.
 */
NldpStatus nldp_problem_validate(const struct NldpProblem *p);

/**
 * Estimate the solution at one start point with `n_paths` Monte Carlo
 * paths (0 means the configuration's default) and the given master seed.
 * The run is deterministic in (problem, point, n_paths, seed) and
 * independent of thread count. On success fills `*out`.
 *
 * # Safety
 * `p` must be a live handle, `point` must point to `dim` doubles, and
 * `out` must point to a writable [`NldpSolveStats`].
 */
NldpStatus nldp_solve_at(const struct NldpProblem *p,
                         const double *point,
                         size_t dim,
                         uint64_t n_paths,
                         uint64_t seed,
                         struct NldpSolveStats *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLDP_H */
