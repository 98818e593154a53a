#ifndef RSLC_H
#define RSLC_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RslcStatus {
  RSLC_STATUS_OK = 0,
  RSLC_STATUS_NULL_POINTER = 1,
  RSLC_STATUS_INVALID_INPUT = 2,
  RSLC_STATUS_NUMERICAL_FAILURE = 3,
  RSLC_STATUS_BUFFER_TOO_SMALL = 4,
  RSLC_STATUS_PANIC = 5,
} RslcStatus;

typedef enum RslcKind {
  RSLC_KIND_FINITE_HORIZON = 0,
  RSLC_KIND_FIRST_EXIT = 1,
  RSLC_KIND_AVERAGE_COST = 2,
} RslcKind;

// A problem: passive dynamics, costs, horizon kind and risk parameter.
typedef struct RslcProblem RslcProblem;

// The result of one solve.
typedef struct RslcSolution RslcSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or an empty string.
// The pointer stays valid until the next call into this library on the
// same thread.
const char *rslc_last_error(void);

// Library version as a static NUL-terminated string.
const char *rslc_version(void);

// Loads a problem file (JSON, or TOML by `.toml` extension).
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum RslcStatus rslc_problem_load(const char *path, bool renormalize, struct RslcProblem **out);

// Builds a problem from passive transition triplets `(from[k], to[k],
// prob[k])` and a per-state running cost.
//
// `final_cost` may be null (defaults to `cost`). `horizon` is used only by
// finite-horizon problems and `terminal` (length `n_terminal`) only by
// first-exit problems.
//
// # Safety
// Array arguments must point to at least the stated number of elements.
enum RslcStatus rslc_problem_from_triplets(size_t n_states,
                                           const size_t *from,
                                           const size_t *to,
                                           const double *prob,
                                           size_t nnz,
                                           const double *cost,
                                           const double *final_cost,
                                           enum RslcKind kind,
                                           size_t horizon,
                                           const size_t *terminal,
                                           size_t n_terminal,
                                           double alpha,
                                           struct RslcProblem **out);

// Builds the two-hill car problem on an `n_position x n_velocity` grid
// (average cost, alpha 0). Non-positive or non-finite physical parameters
// take their defaults.
//
// # Safety
// `out` must be a writable pointer.
enum RslcStatus rslc_problem_hill_car(double r,
                                      double v1,
                                      double v2,
                                      double sigma,
                                      double h,
                                      double g,
                                      size_t n_position,
                                      size_t n_velocity,
                                      struct RslcProblem **out);

// # Safety
// `problem` must come from this library and `out` be writable.
enum RslcStatus rslc_problem_n_states(const struct RslcProblem *problem, size_t *out);

// # Safety
// `problem` must come from this library.
enum RslcStatus rslc_problem_set_alpha(struct RslcProblem *problem, double alpha);

// # Safety
// `problem` must come from this library and not be used afterwards. Null is
// ignored.
void rslc_problem_free(struct RslcProblem *problem);

// Solves the problem at its current alpha. `tol <= 0` and `max_iter == 0`
// select the defaults.
//
// # Safety
// `problem` must come from this library and `out` be writable.
enum RslcStatus rslc_solve(const struct RslcProblem *problem,
                           double tol,
                           size_t max_iter,
                           struct RslcSolution **out);

// Number of stored value stages (`T + 1` for finite horizon, else 1).
//
// # Safety
// `solution` must come from this library and `out` be writable.
enum RslcStatus rslc_solution_n_stages(const struct RslcSolution *solution, size_t *out);

// Copies the value function at `stage` into `buf` (at least `n_states`
// entries).
//
// # Safety
// `buf` must point to `len` writable doubles.
enum RslcStatus rslc_solution_values(const struct RslcSolution *solution,
                                     size_t stage,
                                     double *buf,
                                     size_t len);

// Average cost per step. Fails for problems that are not average-cost.
//
// # Safety
// `solution` must come from this library and `out` be writable.
enum RslcStatus rslc_solution_average_cost(const struct RslcSolution *solution, double *out);

// Bellman residual and iteration count of the solve. Either output may be
// null.
//
// # Safety
// `solution` must come from this library.
enum RslcStatus rslc_solution_diagnostics(const struct RslcSolution *solution,
                                          double *residual,
                                          size_t *iterations);

// Number of nonzero transitions in the optimal (first-step) policy.
//
// # Safety
// `solution` must come from this library and `out` be writable.
enum RslcStatus rslc_solution_policy_nnz(struct RslcSolution *solution, size_t *out);

// Writes the optimal policy as triplets into three arrays of length `cap`
// (at least the value from [`rslc_solution_policy_nnz`]).
//
// # Safety
// Output arrays must each hold `cap` elements.
enum RslcStatus rslc_solution_policy(struct RslcSolution *solution,
                                     size_t *from,
                                     size_t *to,
                                     double *prob,
                                     size_t cap);

// Stationary distribution of the optimally controlled chain (average-cost
// problems). `tol <= 0` and `max_iter == 0` select the defaults.
//
// # Safety
// `buf` must point to `len` writable doubles.
enum RslcStatus rslc_solution_stationary(struct RslcSolution *solution,
                                         double tol,
                                         size_t max_iter,
                                         double *buf,
                                         size_t len);

// # Safety
// `solution` must come from this library and not be used afterwards. Null
// is ignored.
void rslc_solution_free(struct RslcSolution *solution);

// Rényi divergence of order `alpha` between two distributions of length `n`.
//
// # Safety
// `p` and `q` must each point to `n` doubles and `out` be writable.
enum RslcStatus rslc_renyi_divergence(const double *p,
                                      const double *q,
                                      size_t n,
                                      double alpha,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RSLC_H */
