/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef GRAPH_HJB_H
#define GRAPH_HJB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GhjbStatus {
  GHJB_STATUS_OK = 0,
  GHJB_STATUS_NULL_POINTER = 1,
  GHJB_STATUS_INVALID_UTF8 = 2,
  GHJB_STATUS_PARSE = 3,
  GHJB_STATUS_VALIDATION = 4,
  GHJB_STATUS_EVALUATION = 5,
  GHJB_STATUS_INTERNAL = 6,
  GHJB_STATUS_PANIC = 7,
} GhjbStatus;

typedef enum GhjbForm {
  GHJB_FORM_I = 0,
  GHJB_FORM_H = 1,
} GhjbForm;

/**
 * Outcome of an iterative solve, mirrored from the library.
 */
typedef enum GhjbSolveStatus {
  GHJB_SOLVE_STATUS_CONVERGED = 0,
  GHJB_SOLVE_STATUS_MAX_ITER = 1,
  GHJB_SOLVE_STATUS_INFEASIBLE = 2,
  GHJB_SOLVE_STATUS_SINGULAR = 3,
} GhjbSolveStatus;

typedef struct GhjbBoundary GhjbBoundary;

typedef struct GhjbFamily GhjbFamily;

typedef struct GhjbGraph GhjbGraph;

typedef struct GhjbReport GhjbReport;

/**
 * Monte Carlo estimate; `mean` is NaN when every sample was censored.
 */
typedef struct GhjbMcEstimate {
  double mean;
  double std_error;
  size_t samples;
  size_t censored;
} GhjbMcEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *ghjb_last_error_message(void);

void ghjb_clear_last_error(void);

/**
 * Parses `{"n": .., "labels": [..]?, "edges": [[source, target, weight], ..]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GhjbStatus ghjb_graph_from_json(const char *json, struct GhjbGraph **out);

/**
 * # Safety
 * `graph` must be null or a live graph handle.
 */
size_t ghjb_graph_n(const struct GhjbGraph *graph);

/**
 * # Safety
 * `graph` must be null or a handle not yet freed.
 */
void ghjb_graph_free(struct GhjbGraph *graph);

/**
 * Boundary set `Γ` over `n` vertices; must be a nonempty proper subset.
 *
 * # Safety
 * `indices` must point to `len` values and `out` must be valid.
 */
enum GhjbStatus ghjb_boundary_new(const size_t *indices,
                                  size_t len,
                                  size_t n,
                                  struct GhjbBoundary **out);

/**
 * # Safety
 * `boundary` must be null or a handle not yet freed.
 */
void ghjb_boundary_free(struct GhjbBoundary *boundary);

/**
 * Parses a JSON array of row-stochastic matrices (a bare matrix is a family
 * of one). With `normalize`, rows are rescaled to sum to one.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GhjbStatus ghjb_family_from_json(const char *json, bool normalize, struct GhjbFamily **out);

/**
 * # Safety
 * `family` must be null or a live family handle.
 */
size_t ghjb_family_len(const struct GhjbFamily *family);

/**
 * # Safety
 * `family` must be null or a live family handle.
 */
size_t ghjb_family_n(const struct GhjbFamily *family);

/**
 * # Safety
 * `family` must be null or a handle not yet freed.
 */
void ghjb_family_free(struct GhjbFamily *family);

/**
 * Writes `d(x) = min Σ w^(−exponent)` over paths to `Γ` into `out`
 * (`+∞` where `Γ` is unreachable).
 *
 * # Safety
 * Handles must be live and `out` must have room for `len` values.
 */
enum GhjbStatus ghjb_path_distance(const struct GhjbGraph *graph,
                                   const struct GhjbBoundary *boundary,
                                   double exponent,
                                   double *out,
                                   size_t len);

/**
 * Eikonal equation with running cost `f > 0` on the interior and `u = g` on `Γ`.
 *
 * # Safety
 * Handles must be live, `f` and `g` must point to `n` values, `out` valid.
 */
enum GhjbStatus ghjb_solve_eikonal(const struct GhjbGraph *graph,
                                   const double *f,
                                   const double *g,
                                   size_t n,
                                   const struct GhjbBoundary *boundary,
                                   enum GhjbForm form_,
                                   struct GhjbReport **out);

/**
 * p-eikonal equation `H_p(u, x) = f(x)` for `p ≥ 1`.
 *
 * # Safety
 * Handles must be live, `f` and `g` must point to `n` values, `out` valid.
 */
enum GhjbStatus ghjb_solve_peikonal(const struct GhjbGraph *graph,
                                    double p,
                                    const double *f,
                                    const double *g,
                                    size_t n,
                                    const struct GhjbBoundary *boundary,
                                    enum GhjbForm form_,
                                    double tol,
                                    size_t max_iter,
                                    struct GhjbReport **out);

/**
 * Expected running cost plus exit value of kernel `kernel_index` of `family`.
 *
 * # Safety
 * Handles must be live, `f` and `g` must point to `n` values, `out` valid.
 */
enum GhjbStatus ghjb_solve_linear_exit(const struct GhjbFamily *family,
                                       size_t kernel_index,
                                       const double *f,
                                       const double *g,
                                       size_t n,
                                       const struct GhjbBoundary *boundary,
                                       struct GhjbReport **out);

/**
 * Value iteration for the minimal-cost Bellman equation.
 *
 * # Safety
 * Handles must be live, `f` and `g` must point to `n` values, `out` valid.
 */
enum GhjbStatus ghjb_value_iteration(const struct GhjbFamily *family,
                                     const double *f,
                                     const double *g,
                                     size_t n,
                                     const struct GhjbBoundary *boundary,
                                     double tol,
                                     size_t max_iter,
                                     struct GhjbReport **out);

/**
 * Policy iteration; the final policy is read with [`ghjb_report_policy`].
 *
 * # Safety
 * Handles must be live, `f` and `g` must point to `n` values, `out` valid.
 */
enum GhjbStatus ghjb_policy_iteration(const struct GhjbFamily *family,
                                      const double *f,
                                      const double *g,
                                      size_t n,
                                      const struct GhjbBoundary *boundary,
                                      double tol,
                                      size_t max_iter,
                                      struct GhjbReport **out);

/**
 * Exit-time certificate: the report solution is `φ` (empty unless
 * converged) and [`ghjb_report_bound`] gives `2·‖φ‖`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
enum GhjbStatus ghjb_certify(const struct GhjbFamily *family,
                             const struct GhjbBoundary *boundary,
                             double tol,
                             size_t max_iter,
                             struct GhjbReport **out);

/**
 * Monte Carlo estimate of `E[Σ_{t<τ} f(X_t) + g(X_τ)]` from `x0` under
 * kernel `kernel_index`, with per-sample streams keyed by `seed`.
 *
 * # Safety
 * Handles must be live, `f` and `g` must point to `n` values, `out` valid.
 */
enum GhjbStatus ghjb_estimate_exit_functional(const struct GhjbFamily *family,
                                              size_t kernel_index,
                                              const double *f,
                                              const double *g,
                                              size_t n,
                                              const struct GhjbBoundary *boundary,
                                              size_t x0,
                                              size_t samples,
                                              uint64_t seed,
                                              size_t max_steps,
                                              struct GhjbMcEstimate *out);

/**
 * # Safety
 * `report` must be a live report handle.
 */
enum GhjbSolveStatus ghjb_report_status(const struct GhjbReport *report);

/**
 * # Safety
 * `report` must be null or a live report handle.
 */
size_t ghjb_report_iterations(const struct GhjbReport *report);

/**
 * # Safety
 * `report` must be null or a live report handle.
 */
double ghjb_report_residual(const struct GhjbReport *report);

/**
 * # Safety
 * `report` must be null or a live report handle.
 */
double ghjb_report_bound(const struct GhjbReport *report);

/**
 * Number of solution values (0 for an infeasible certificate).
 *
 * # Safety
 * `report` must be null or a live report handle.
 */
size_t ghjb_report_len(const struct GhjbReport *report);

/**
 * # Safety
 * `report` must be live and `out` must have room for `len` values.
 */
enum GhjbStatus ghjb_report_solution(const struct GhjbReport *report, double *out, size_t len);

/**
 * Kernel index chosen at each vertex by policy iteration.
 *
 * # Safety
 * `report` must be live and `out` must have room for `len` values.
 */
enum GhjbStatus ghjb_report_policy(const struct GhjbReport *report, size_t *out, size_t len);

/**
 * # Safety
 * `report` must be null or a handle not yet freed.
 */
void ghjb_report_free(struct GhjbReport *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPH_HJB_H */
