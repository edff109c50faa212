#ifndef GLASSKIT_H
#define GLASSKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GkStatus {
  GK_STATUS_OK = 0,
  GK_STATUS_NULL_POINTER = 1,
  GK_STATUS_INVALID_INPUT = 2,
  GK_STATUS_DOMAIN = 3,
  GK_STATUS_NON_SYMMETRIC = 4,
  GK_STATUS_NO_CONVERGENCE = 5,
  GK_STATUS_NO_ROOT = 6,
  GK_STATUS_TRIVIAL_PHASE = 7,
  GK_STATUS_CHAIN_TOO_SHORT = 8,
  GK_STATUS_PANIC = 9,
} GkStatus;

/**
 * A single p-spin system.
 */
typedef struct GkModel GkModel;

/**
 * A validated overlap constraint matrix.
 */
typedef struct GkOverlap GkOverlap;

/**
 * Outcome of an exclusion test.
 */
typedef struct GkVerdict GkVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len`) and returns the full message length excluding the NUL, or 0 when
 * there is none. Pass a null `buf` to query the length.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t gk_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *gk_version(void);

/**
 * # Safety
 * `out` must be valid for writes. Release the handle with [`gk_model_free`].
 */
enum GkStatus gk_model_new(uint32_t p, double beta, double h, struct GkModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`gk_model_new`] not yet freed.
 */
void gk_model_free(struct GkModel *model);

/**
 * `ξ(q) = q^p/p` of the model (β not included).
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum GkStatus gk_model_xi(const struct GkModel *model, double q, double *out);

/**
 * `θ(q) = qξ'(q) − ξ(q)`.
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum GkStatus gk_model_theta(const struct GkModel *model, double q, double *out);

/**
 * Limiting free energy P(β, h).
 *
 * # Safety
 * `model` must be a live handle and `out` valid for writes.
 */
enum GkStatus gk_free_energy(const struct GkModel *model, double *out);

/**
 * Minimizes the k-level functional; `form` is 0 for the Parisi form and 1
 * for the Crisanti–Sommers form. `grad_norm` may be null.
 *
 * # Safety
 * `model` must be a live handle, `value` valid for writes, `grad_norm`
 * null or valid for writes.
 */
enum GkStatus gk_minimize_parisi(const struct GkModel *model,
                                 size_t k,
                                 uint32_t form,
                                 double *value,
                                 double *grad_norm);

/**
 * Positive root of the x equation for even `p`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GkStatus gk_solve_x(uint32_t p, double *out);

/**
 * Predicted cross overlap of two 2-spin systems.
 *
 * # Safety
 * Both models must be live handles and `out` valid for writes.
 */
enum GkStatus gk_chaos_u0(const struct GkModel *model1, const struct GkModel *model2, double *out);

/**
 * Builds an `n × n` overlap matrix from `len = n²` row-major entries.
 *
 * # Safety
 * `values` must be valid for `len` reads and `out` valid for writes.
 */
enum GkStatus gk_overlap_new(const double *values, size_t len, struct GkOverlap **out);

/**
 * # Safety
 * `q` must be null or a handle from [`gk_overlap_new`] not yet freed.
 */
void gk_overlap_free(struct GkOverlap *q);

/**
 * Dimension of the constraint.
 *
 * # Safety
 * `q` must be a live handle.
 */
size_t gk_overlap_dim(const struct GkOverlap *q);

/**
 * Eigenvalue bound for 2-spin replicas at temperatures `betas[0..n]`.
 *
 * # Safety
 * `q` must be a live handle, `betas` valid for `n` reads, `out` valid for
 * writes. Release the verdict with [`gk_verdict_free`].
 */
enum GkStatus gk_bound_theorem1(const struct GkOverlap *q,
                                const double *betas,
                                size_t n,
                                struct GkVerdict **out);

/**
 * Verdict on the non-ultrametric triple at `q = 1 − 1/β`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum GkStatus gk_ultrametricity_verdict(double beta, struct GkVerdict **out);

/**
 * # Safety
 * `v` must be null or a verdict handle not yet freed.
 */
void gk_verdict_free(struct GkVerdict *v);

/**
 * # Safety
 * `v` must be a live handle.
 */
bool gk_verdict_excluded(const struct GkVerdict *v);

/**
 * Writes the bound; returns `GK_STATUS_DOMAIN` when it is undefined.
 *
 * # Safety
 * `v` must be a live handle and `out` valid for writes.
 */
enum GkStatus gk_verdict_bound(const struct GkVerdict *v, double *out);

/**
 * # Safety
 * `v` must be a live handle and `out` valid for writes.
 */
enum GkStatus gk_verdict_trivial_sum(const struct GkVerdict *v, double *out);

/**
 * Number of rescaled eigenvalues.
 *
 * # Safety
 * `v` must be a live handle.
 */
size_t gk_verdict_eigenvalue_count(const struct GkVerdict *v);

/**
 * Copies up to `len` ascending eigenvalues into `out`; returns the count copied.
 *
 * # Safety
 * `v` must be a live handle and `out` valid for `len` writes.
 */
size_t gk_verdict_eigenvalues(const struct GkVerdict *v, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GLASSKIT_H */
