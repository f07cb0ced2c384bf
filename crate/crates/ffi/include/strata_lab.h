#ifndef STRATA_LAB_H
#define STRATA_LAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_ARGUMENT = 2,
  SL_STATUS_UNKNOWN_FUNCTION = 3,
  SL_STATUS_INVALID_PARAMS = 4,
  SL_STATUS_DIMENSION_MISMATCH = 5,
  SL_STATUS_PRECONDITION = 6,
  SL_STATUS_BUFFER_TOO_SMALL = 7,
  SL_STATUS_INTERNAL = 8,
} SlStatus;

/**
 * Catalog function handle.
 */
typedef struct SlFunction SlFunction;

/**
 * Neighborhood parameter handle.
 */
typedef struct SlParams SlParams;

/**
 * Selection handle.
 */
typedef struct SlSelection SlSelection;

/**
 * Trajectory handle.
 */
typedef struct SlTrajectory SlTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/**
 * Looks up a catalog entry by name, e.g. `appendix_fig1` or `abs_power(0.5)`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SlStatus sl_function_new(const char *name, struct SlFunction **out);

/**
 * # Safety
 * `f` must come from [`sl_function_new`] and not be used afterwards.
 */
void sl_function_free(struct SlFunction *f);

/**
 * Ambient dimension, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t sl_function_dim(const struct SlFunction *f);

/**
 * Number of strata, or 0 for a null handle.
 *
 * # Safety
 * `f` must be null or a live handle.
 */
size_t sl_function_num_strata(const struct SlFunction *f);

/**
 * # Safety
 * `x` must point to `n` doubles and `out` to one.
 */
enum SlStatus sl_function_value(const struct SlFunction *f, const double *x, size_t n, double *out);

/**
 * Writes the deterministic subgradient at `x` into `out` (length `n`).
 *
 * # Safety
 * `x` and `out` must each point to `n` doubles.
 */
enum SlStatus sl_function_subgradient(const struct SlFunction *f,
                                      const double *x,
                                      size_t n,
                                      double *out);

/**
 * Automatic exponents; `gamma` and `gamma0` are derived when not positive.
 *
 * # Safety
 * `f` must be a live handle and `out` a valid pointer.
 */
enum SlStatus sl_params_auto(const struct SlFunction *f,
                             double gamma,
                             double gamma0,
                             struct SlParams **out);

/**
 * # Safety
 * `p` must come from [`sl_params_auto`] and not be used afterwards.
 */
void sl_params_free(struct SlParams *p);

/**
 * Reads the exponents and step sizes; any output pointer may be null.
 *
 * # Safety
 * `p` must be a live handle; non-null outputs must be writable.
 */
enum SlStatus sl_params_get(const struct SlParams *p,
                            double *alpha,
                            double *beta,
                            double *gamma,
                            double *gamma0);

/**
 * Constant-step run of `k` steps from `x1` (length `n`).
 *
 * # Safety
 * `x1` must point to `n` doubles and `out` be a valid pointer.
 */
enum SlStatus sl_run_constant(const struct SlFunction *f,
                              const double *x1,
                              size_t n,
                              double gamma,
                              size_t k,
                              struct SlTrajectory **out);

/**
 * Run with steps `c / k`.
 *
 * # Safety
 * As [`sl_run_constant`].
 */
enum SlStatus sl_run_inverse_k(const struct SlFunction *f,
                               const double *x1,
                               size_t n,
                               double c,
                               size_t k,
                               struct SlTrajectory **out);

/**
 * # Safety
 * `t` must come from a run function and not be used afterwards.
 */
void sl_trajectory_free(struct SlTrajectory *t);

/**
 * Number of steps taken (iterates are numbered 1 to len + 1).
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t sl_trajectory_len(const struct SlTrajectory *t);

/**
 * Index of the first iterate outside the domain, or 0 if none.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t sl_trajectory_escaped_at(const struct SlTrajectory *t);

/**
 * Copies iterate `k` (1-based, up to len + 1) into `out` of length `n`.
 *
 * # Safety
 * `out` must point to `n` writable doubles.
 */
enum SlStatus sl_trajectory_iterate(const struct SlTrajectory *t, size_t k, double *out, size_t n);

/**
 * Builds the selection of a constant-step trajectory.
 *
 * # Safety
 * All handles must be live and `out` a valid pointer.
 */
enum SlStatus sl_selection_build(const struct SlFunction *f,
                                 const struct SlTrajectory *t,
                                 const struct SlParams *p,
                                 struct SlSelection **out);

/**
 * # Safety
 * `s` must come from [`sl_selection_build`] and not be used afterwards.
 */
void sl_selection_free(struct SlSelection *s);

/**
 * # Safety
 * `s` must be null or a live handle.
 */
size_t sl_selection_len(const struct SlSelection *s);

/**
 * Copies the stratum id of every index into `out` (capacity `cap`).
 *
 * # Safety
 * `out` must point to `cap` writable elements.
 */
enum SlStatus sl_selection_assignments(const struct SlSelection *s, size_t *out, size_t cap);

/**
 * Writes 1 or 0 into `valid` and `good`.
 *
 * # Safety
 * All handles must be live and the outputs writable.
 */
enum SlStatus sl_selection_verify(const struct SlFunction *f,
                                  const struct SlTrajectory *t,
                                  const struct SlParams *p,
                                  const struct SlSelection *s,
                                  int *valid,
                                  int *good);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* STRATA_LAB_H */
