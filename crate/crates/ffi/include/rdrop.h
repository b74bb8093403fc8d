#ifndef RDROP_H
#define RDROP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Result codes. Zero is success.
 */
typedef enum RdropStatus {
  RDROP_STATUS_OK = 0,
  RDROP_STATUS_NULL_POINTER = 1,
  RDROP_STATUS_INVALID_PARAMS = 2,
  RDROP_STATUS_DOMAIN = 3,
  RDROP_STATUS_NON_CONVERGENCE = 4,
  RDROP_STATUS_OVERLAP = 5,
  RDROP_STATUS_CAP_EXCEEDED = 6,
  RDROP_STATUS_OTHER = 7,
  RDROP_STATUS_PANIC = 8,
} RdropStatus;

typedef enum RdropVerdict {
  RDROP_VERDICT_STRICTLY_STABLE = 0,
  RDROP_VERDICT_UNSTABLE = 1,
  RDROP_VERDICT_MARGINAL = 2,
} RdropVerdict;

/*
 Opaque handle: parameters plus their precomputed coefficient table.
 */
typedef struct RdropModel RdropModel;

/*
 Perimeter, Riesz energy and total `perimeter + gamma * nonlocal`.
 */
typedef struct RdropEnergy {
  double perimeter;
  double nonlocal;
  double total;
} RdropEnergy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Creates a model for dimension `dim`, exponent `alpha` and coupling
 `gamma`. On success `*out` owns a handle to pass to `rdrop_model_free`.

 # Safety
 `out` must be null or valid for writes.
 */
enum RdropStatus rdrop_model_new(uint32_t dim, double alpha, double gamma, struct RdropModel **out);

/*
 Releases a handle; null is ignored.

 # Safety
 `model` must be null or a handle from `rdrop_model_new` not yet freed.
 */
void rdrop_model_free(struct RdropModel *model);

/*
 Funk-Hecke eigenvalue `mu_d`.

 # Safety
 `model` must be a live handle or null; `out` null or valid for writes.
 */
enum RdropStatus rdrop_mu(const struct RdropModel *model, size_t d, double *out);

/*
 The confinement coefficient `I`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_i_coefficient(const struct RdropModel *model, double *out);

/*
 Riesz energy of the unit ball.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_ball_self_energy(const struct RdropModel *model, double *out);

/*
 Second-variation eigenvalue `lambda_d(R)`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_mode_eigenvalue(const struct RdropModel *model,
                                       double radius,
                                       size_t d,
                                       double *out);

/*
 `d_A`, the first degree with `mu_d < alpha I`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_first_unstable_degree(const struct RdropModel *model, size_t *out);

/*
 `d_I`, the degree from which the neutral radius increases.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_monotonicity_switch_degree(const struct RdropModel *model, size_t *out);

/*
 Critical radius `R_bar`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_critical_radius(const struct RdropModel *model, double *out);

/*
 Critical mass `m_loc = w_N R_bar^N`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_critical_mass(const struct RdropModel *model, double *out);

/*
 Stability of the ball of radius `radius`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_stability_verdict(const struct RdropModel *model,
                                         double radius,
                                         enum RdropVerdict *out);

/*
 Energy of a single ball of volume `m`.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_single_ball_energy(const struct RdropModel *model,
                                          double m,
                                          struct RdropEnergy *out);

/*
 Explicit upper bound for the global-minimality mass threshold.

 # Safety
 As for `rdrop_mu`.
 */
enum RdropStatus rdrop_mglob_upper_bound(const struct RdropModel *model, double *out);

/*
 Best split of mass `m` into at most `k` balls. Writes `k` masses in
 decreasing order (zeros for unused balls) and the energy `f_k(m)`.

 # Safety
 `model` as for `rdrop_mu`; `masses` null or valid for `k` writes;
 `value` null or valid for one write.
 */
enum RdropStatus rdrop_optimal_partition(const struct RdropModel *model,
                                         double m,
                                         size_t k,
                                         double *masses,
                                         double *value);

/*
 Message of the last failed call on this thread, empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *rdrop_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *rdrop_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RDROP_H */
