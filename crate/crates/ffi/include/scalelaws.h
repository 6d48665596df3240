#ifndef SCALELAWS_H
#define SCALELAWS_H

/* This file is generated by cbindgen from scalelaws-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status code of every fallible call.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  /*
   A required pointer argument was NULL.
   */
  SL_STATUS_NULL_POINTER = 1,
  /*
   An argument lies outside the mathematical domain of the operation.
   */
  SL_STATUS_DOMAIN_ERROR = 2,
  /*
   Too few points, or too little variation, to run a fit.
   */
  SL_STATUS_INSUFFICIENT_DATA = 3,
  /*
   The data admits no identifiable fit.
   */
  SL_STATUS_DEGENERATE_FIT = 4,
  /*
   The regression design matrix is rank-deficient.
   */
  SL_STATUS_COLLINEAR_DESIGN = 5,
  /*
   A numerical routine failed to produce a usable result.
   */
  SL_STATUS_NUMERICAL_ERROR = 6,
  /*
   An out-buffer was too small; see the written count for the need.
   */
  SL_STATUS_BUFFER_TOO_SMALL = 7,
  /*
   The library panicked; state is unchanged but the call failed.
   */
  SL_STATUS_PANIC = 8,
} SlStatus;

/*
 Opaque joint-fit result.
 */
typedef struct SlJointFit SlJointFit;

/*
 Opaque joint scaling law `L(N, D) = E + A*N^-alpha + B*D^-beta`.
 */
typedef struct SlJointLaw SlJointLaw;

/*
 Compute-optimal allocation of one budget.
 */
typedef struct SlAllocation {
  double n_star;
  double d_star;
  double loss_at_opt;
  double exponent_n;
  double exponent_d;
  double gamma;
} SlAllocation;

/*
 Fit-engine configuration mirrored as a plain C struct. Obtain defaults
 from `sl_fit_config_default` and override fields as needed.
 */
typedef struct SlFitConfig {
  /*
   0 = linear residuals, 1 = log residuals.
   */
  int residual_space;
  /*
   0 = least squares, 1 = Huber with automatic threshold, 2 = Huber
   with `huber_delta`.
   */
  int robust;
  double huber_delta;
  uint64_t max_iterations;
  double rel_tolerance;
  uint64_t n_starts;
  uint64_t seed;
  /*
   Nonzero rejects constant-loss inputs instead of a flat fit.
   */
  int error_on_constant;
} SlFitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Last error description for this thread; empty until a call fails.
 The pointer stays valid until the next failing call on the same thread.
 */
const char *sl_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/*
 Creates a joint-law handle; fails on invalid parameters.

 # Safety
 `out` must be a valid pointer to an `SlJointLaw*` slot.
 */
enum SlStatus sl_joint_law_new(double e,
                               double a,
                               double alpha,
                               double b,
                               double beta,
                               struct SlJointLaw **out);

/*
 Releases a joint-law handle. NULL is a no-op.

 # Safety
 `law` must be NULL or a pointer returned by this library and not yet
 freed.
 */
void sl_joint_law_free(struct SlJointLaw *law);

/*
 Reads the five parameters back out of a handle.

 # Safety
 All pointers must be valid; `law` must be a live handle.
 */
enum SlStatus sl_joint_law_params(const struct SlJointLaw *law,
                                  double *e,
                                  double *a,
                                  double *alpha,
                                  double *b,
                                  double *beta);

/*
 Predicted loss at model size `n` and data size `d`.

 # Safety
 `law` must be a live handle; `out_loss` must be valid.
 */
enum SlStatus sl_joint_eval(const struct SlJointLaw *law, double n, double d, double *out_loss);

/*
 Excess loss over a floor: `loss - floor` (may be negative).
 */
double sl_excess_loss(double floor, double loss);

/*
 Factor by which excess loss shrinks under a k-fold scale-up:
 `k^-exponent`.

 # Safety
 `out_ratio` must be valid.
 */
enum SlStatus sl_reduction_ratio(double exponent, double k, double *out_ratio);

/*
 Total training compute in FLOPs: `6 * macs_fwd * batch * steps`.

 # Safety
 `out_flops` must be valid.
 */
enum SlStatus sl_compute_budget(double macs_fwd, uint64_t batch, uint64_t steps, double *out_flops);

/*
 Growth exponents of the compute-optimal allocation and the compute
 efficiency gamma.

 # Safety
 Out-pointers must be valid.
 */
enum SlStatus sl_allocation_exponents(double alpha,
                                      double beta,
                                      double *out_exponent_n,
                                      double *out_exponent_d,
                                      double *out_gamma);

/*
 Allocation exponents under the generalized constraint `C ~ N^a * D^b`.

 # Safety
 Out-pointers must be valid.
 */
enum SlStatus sl_generalized_allocation_exponents(double alpha,
                                                  double beta,
                                                  double a,
                                                  double b,
                                                  double *out_exponent_n,
                                                  double *out_exponent_d);

/*
 Closed-form compute-optimal `(N*, D*)` for a budget under
 `C = kappa_const * N * D`.

 # Safety
 `law` must be a live handle; `out` must be valid.
 */
enum SlStatus sl_optimal_allocation(const struct SlJointLaw *law,
                                    double c,
                                    double kappa_const,
                                    struct SlAllocation *out);

/*
 Relative loss inflation from finite data over the infinite-data floor.

 # Safety
 `law` must be a live handle; `out` must be valid.
 */
enum SlStatus sl_overfit_extent(const struct SlJointLaw *law, double n, double d, double *out);

/*
 Minimum unique data size keeping the overfitting extent at or below
 `epsilon`.

 # Safety
 `law` must be a live handle; `out` must be valid.
 */
enum SlStatus sl_min_data_for_tolerance(const struct SlJointLaw *law,
                                        double n,
                                        double epsilon,
                                        double *out);

/*
 Writes the default fit configuration.

 # Safety
 `out` must be valid.
 */
enum SlStatus sl_fit_config_default(struct SlFitConfig *out);

/*
 Fits the joint law to parallel arrays of `(n, d, loss)` points.
 `config` may be NULL for defaults. The returned handle must be freed
 with `sl_joint_fit_free`.

 # Safety
 `n`, `d`, `loss` must each point to `len` doubles; `out` must be valid.
 */
enum SlStatus sl_fit_joint(const double *n,
                           const double *d,
                           const double *loss,
                           size_t len,
                           const struct SlFitConfig *config,
                           struct SlJointFit **out);

/*
 Releases a joint-fit handle. NULL is a no-op.

 # Safety
 `fit` must be NULL or a pointer returned by `sl_fit_joint`, not yet freed.
 */
void sl_joint_fit_free(struct SlJointFit *fit);

/*
 Copies the fitted law out of a fit result into a fresh law handle.

 # Safety
 `fit` must be a live handle; `out` must be valid.
 */
enum SlStatus sl_joint_fit_law(const struct SlJointFit *fit, struct SlJointLaw **out);

/*
 Fit diagnostics of a joint fit: R^2, objective value, convergence flag,
 and the winning start index. Any out-pointer may be NULL to skip it.

 # Safety
 `fit` must be a live handle; non-NULL out-pointers must be valid.
 */
enum SlStatus sl_joint_fit_stats(const struct SlJointFit *fit,
                                 double *out_r_squared,
                                 double *out_sse,
                                 int *out_converged,
                                 uint64_t *out_start_index);

/*
 Fits a single-axis law `L(x) = E + coeff * x^-exponent`.
 `config` may be NULL for defaults.

 # Safety
 `x` and `loss` must point to `len` doubles; out-pointers must be valid.
 */
enum SlStatus sl_fit_marginal(const double *x,
                              const double *loss,
                              size_t len,
                              const struct SlFitConfig *config,
                              double *out_e,
                              double *out_coeff,
                              double *out_exponent,
                              double *out_r_squared);

/*
 Fits the compute frontier `L(C) = a*(C+c)^-b + d`.
 `config` may be NULL for defaults.

 # Safety
 `compute` and `loss` must point to `len` doubles; out-pointers must be
 valid.
 */
enum SlStatus sl_fit_frontier(const double *compute,
                              const double *loss,
                              size_t len,
                              const struct SlFitConfig *config,
                              double *out_a,
                              double *out_b,
                              double *out_c,
                              double *out_d,
                              double *out_r_squared);

/*
 Fits the loss-to-loss transfer law on paired `(l_id, l_ood)` arrays with
 fixed floors. Pass NaN for `kappa_floor` to disable the floor. Pairs with
 non-positive excess are dropped; the count lands in `out_n_dropped`.

 # Safety
 `l_id` and `l_ood` must point to `len` doubles; out-pointers must be
 valid (`out_r_squared` and `out_n_dropped` may be NULL).
 */
enum SlStatus sl_fit_loss_to_loss(const double *l_id,
                                  const double *l_ood,
                                  size_t len,
                                  double e_id,
                                  double e_ood,
                                  double kappa_floor,
                                  double *out_k,
                                  double *out_kappa,
                                  double *out_r_squared,
                                  uint64_t *out_n_dropped);

/*
 Predicted OOD loss at an ID loss: `e_ood + k*(l_id - e_id)^kappa`.

 # Safety
 `out_l_ood` must be valid.
 */
enum SlStatus sl_predict_ood(double k,
                             double kappa,
                             double e_id,
                             double e_ood,
                             double l_id,
                             double *out_l_ood);

/*
 Fits the fine-tuning transfer law `d_t = k * d_f^g1 * n^g2` by OLS in
 log space.

 # Safety
 `d_f` and `n_params` must point to `len` u64 values, `d_t` to `len`
 doubles; out-pointers must be valid (`out_r_squared` may be NULL).
 */
enum SlStatus sl_fit_transfer(const uint64_t *d_f,
                              const uint64_t *n_params,
                              const double *d_t,
                              size_t len,
                              double *out_k,
                              double *out_gamma1,
                              double *out_gamma2,
                              double *out_r_squared);

/*
 Finds crossings of two single-axis curves inside `[x_lo, x_hi]`.
 Roots are written into the caller's buffer; if more roots exist than
 `capacity`, `SL_STATUS_BUFFER_TOO_SMALL` is returned with the required
 count in `out_count`. `out_coincident` is nonzero when the curves agree
 everywhere in range.

 # Safety
 `out_roots` must point to `capacity` doubles; `out_count` and
 `out_coincident` must be valid.
 */
enum SlStatus sl_crossover(double e1,
                           double coeff1,
                           double exponent1,
                           double e2,
                           double coeff2,
                           double exponent2,
                           double x_lo,
                           double x_hi,
                           double *out_roots,
                           size_t capacity,
                           size_t *out_count,
                           int *out_coincident);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCALELAWS_H */
