#ifndef COVRECON_H
#define COVRECON_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CovreconStatus {
  COVRECON_STATUS_OK = 0,
  COVRECON_STATUS_NULL_POINTER = 1,
  COVRECON_STATUS_INVALID_ARGUMENT = 2,
  COVRECON_STATUS_DIMENSION_MISMATCH = 3,
  COVRECON_STATUS_SPACE_MISMATCH = 4,
  COVRECON_STATUS_NOT_SYMMETRIC = 5,
  COVRECON_STATUS_NOT_POSITIVE_DEFINITE = 6,
  COVRECON_STATUS_NUMERIC_FAILURE = 7,
  COVRECON_STATUS_OUT_OF_RANGE = 8,
  COVRECON_STATUS_BUFFER_TOO_SMALL = 9,
  COVRECON_STATUS_IO = 10,
  COVRECON_STATUS_PANIC = 11,
} CovreconStatus;

/**
 * Mass-orthonormal eigenpairs tied to one space.
 */
typedef struct CovreconEigenSystem CovreconEigenSystem;

/**
 * Covariance model with a known spectrum.
 */
typedef struct CovreconModel CovreconModel;

/**
 * Finite element space on the unit interval or square.
 */
typedef struct CovreconSpace CovreconSpace;

typedef struct CovreconErrorReport {
  double e1;
  double e2;
  double e3;
  double total;
} CovreconErrorReport;

typedef struct CovreconPlan {
  /**
   * 1, 2 or 3.
   */
  int32_t regime;
  uint64_t l_eps;
  /**
   * Integer valued; may exceed the range of `u64`.
   */
  double m_eps;
  double h_lo;
  double h_hi;
  double h_eps;
  bool vacuous;
  bool capped;
} CovreconPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message (NUL-terminated,
 * truncated to fit) and returns its full length in bytes.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t covrecon_last_error(char *buf, size_t len);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum CovreconStatus covrecon_space_new(size_t dim,
                                       size_t elements,
                                       bool orthonormal,
                                       struct CovreconSpace **out);

/**
 * # Safety
 * `space` must come from `covrecon_space_new` and not be used afterwards.
 */
void covrecon_space_free(struct CovreconSpace *space);

/**
 * # Safety
 * `space` must be a live handle and `out` writable.
 */
enum CovreconStatus covrecon_space_dof_count(const struct CovreconSpace *space, size_t *out);

/**
 * Mass matrix of the space's basis.
 *
 * # Safety
 * `space` must be a live handle; `out` must hold `len` doubles.
 */
enum CovreconStatus covrecon_space_mass(const struct CovreconSpace *space, double *out, size_t len);

/**
 * `name` is `brownian-1d` or `brownian-sheet`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` writable.
 */
enum CovreconStatus covrecon_model_new(const char *name, struct CovreconModel **out);

/**
 * # Safety
 * `model` must come from `covrecon_model_new` and not be used afterwards.
 */
void covrecon_model_free(struct CovreconModel *model);

/**
 * The `count` largest eigenvalues, non-increasing.
 *
 * # Safety
 * `model` must be a live handle; `out` must hold `count` doubles.
 */
enum CovreconStatus covrecon_model_eigenvalues(const struct CovreconModel *model,
                                               size_t count,
                                               double *out);

/**
 * `(Σ_{ℓ>L} λ_ℓ²)^{1/2}`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum CovreconStatus covrecon_truncation_error(const struct CovreconModel *model,
                                              size_t l,
                                              double *out);

/**
 * `m × n_h` coefficient samples (row-major) drawn with `l_gen` modes.
 *
 * # Safety
 * Handles must be live; `out` must hold `len ≥ m · n_h` doubles.
 */
enum CovreconStatus covrecon_sample_field(const struct CovreconModel *model,
                                          const struct CovreconSpace *space,
                                          size_t l_gen,
                                          size_t m,
                                          uint64_t seed,
                                          double *out,
                                          size_t len);

/**
 * Exact coefficient covariance of the model projected onto the space.
 *
 * # Safety
 * Handles must be live; `out` must hold `len ≥ n_h²` doubles.
 */
enum CovreconStatus covrecon_projected_covariance(const struct CovreconModel *model,
                                                  const struct CovreconSpace *space,
                                                  double *out,
                                                  size_t len);

/**
 * Tapered covariance of `m × n` row-major samples. `tau = 0` picks the
 * optimal even width for `alpha`; `out_tau` (optional) receives the width.
 *
 * # Safety
 * `samples` must hold `m · n` doubles, `out` at least `n²`.
 */
enum CovreconStatus covrecon_tapered_covariance(const double *samples,
                                                size_t m,
                                                size_t n,
                                                size_t tau,
                                                double alpha,
                                                double *out,
                                                size_t len,
                                                size_t *out_tau);

/**
 * Generalized eigendecomposition `Σ Φ = Φ Λ` with `Φᵀ M Φ = I` for a
 * row-major `n_h × n_h` coefficient covariance. `exact` selects the
 * provenance tag.
 *
 * # Safety
 * `space` must be live, `sigma` must hold `n_h²` doubles, `out` writable.
 */
enum CovreconStatus covrecon_eigen_new(const struct CovreconSpace *space,
                                       const double *sigma,
                                       size_t n,
                                       bool exact,
                                       struct CovreconEigenSystem **out);

/**
 * # Safety
 * `sys` must come from `covrecon_eigen_new` and not be used afterwards.
 */
void covrecon_eigen_free(struct CovreconEigenSystem *sys);

/**
 * Eigenvalues, non-increasing.
 *
 * # Safety
 * `sys` must be live; `out` must hold `len ≥ n_h` doubles.
 */
enum CovreconStatus covrecon_eigen_values(const struct CovreconEigenSystem *sys,
                                          double *out,
                                          size_t len);

/**
 * Eigenvector coefficients, row-major `n_h × n_h` (column `j` is mode `j`).
 *
 * # Safety
 * `sys` must be live; `out` must hold `len ≥ n_h²` doubles.
 */
enum CovreconStatus covrecon_eigen_vectors(const struct CovreconEigenSystem *sys,
                                           double *out,
                                           size_t len);

/**
 * Truncation, discretization and sampling errors at level `l` plus the
 * total `L²` error of the sampled reconstruction.
 *
 * # Safety
 * All handles must be live and `out` writable.
 */
enum CovreconStatus covrecon_error_decomposition(const struct CovreconModel *model,
                                                 const struct CovreconEigenSystem *exact,
                                                 const struct CovreconEigenSystem *sampled,
                                                 size_t l,
                                                 struct CovreconErrorReport *out);

/**
 * Sufficient `(L, M, h)` for accuracy `eps` under Brownian-motion
 * surrogates (all unknown constants set to one). `regime` is 1, 2 or 3;
 * 0 selects the closed-form univariate plan.
 *
 * # Safety
 * `out` must be writable.
 */
enum CovreconStatus covrecon_plan_brownian(double eps, int32_t regime, struct CovreconPlan *out);

/**
 * Lambert W; `branch` 0 is the principal branch, −1 the lower one.
 *
 * # Safety
 * `out` must be writable.
 */
enum CovreconStatus covrecon_lambert_w(double x, int32_t branch, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COVRECON_H */
