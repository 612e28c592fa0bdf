#ifndef FRGAUSS_H
#define FRGAUSS_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum FrStatus {
  FR_STATUS_OK = 0,
  FR_STATUS_NULL_POINTER = 1,
  FR_STATUS_INVALID_ARGUMENT = 2,
  FR_STATUS_DIMENSION_MISMATCH = 3,
  FR_STATUS_NOT_POSITIVE_DEFINITE = 4,
  FR_STATUS_NUMERICAL = 5,
  FR_STATUS_BUFFER_TOO_SMALL = 6,
  FR_STATUS_PANIC = 7,
} FrStatus;

/**
 * Opaque symmetric positive-definite matrix.
 */
typedef struct FrSpd FrSpd;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a handle from `dim * dim` row-major entries. Only the symmetric
 * part `(M + Mᵀ)/2` is kept, and it must be positive definite.
 *
 * # Safety
 * `data` must point to `dim * dim` readable doubles and `out` must be writable.
 */
enum FrStatus fr_spd_new(const double *data, size_t dim, struct FrSpd **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `spd` must come from this library and not be used afterwards.
 */
void fr_spd_free(struct FrSpd *spd);

/**
 * Dimension of the handle, or 0 for null.
 *
 * # Safety
 * `spd` must be null or a live handle.
 */
size_t fr_spd_dim(const struct FrSpd *spd);

/**
 * Copies the entries row-major into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `spd` must be a live handle and `buf` must hold `len` writable doubles.
 */
enum FrStatus fr_spd_copy(const struct FrSpd *spd, double *buf, size_t len);

/**
 * Fisher–Rao distance between two covariances.
 *
 * # Safety
 * `a`, `b` must be live handles and `out` writable.
 */
enum FrStatus fr_distance(const struct FrSpd *a, const struct FrSpd *b, double *out);

/**
 * Point at parameter `t` on the geodesic from `a` to `b`, as a new handle.
 *
 * # Safety
 * `a`, `b` must be live handles and `out` writable.
 */
enum FrStatus fr_geodesic(const struct FrSpd *a,
                          const struct FrSpd *b,
                          double t,
                          struct FrSpd **out);

/**
 * `KL(N(0, nu) ‖ N(0, mu))`.
 *
 * # Safety
 * `nu`, `mu` must be live handles and `out` writable.
 */
enum FrStatus fr_kl_divergence(const struct FrSpd *nu, const struct FrSpd *mu, double *out);

/**
 * Distance between the unitized operators `a + gamma_a I` and `b + gamma_b I`,
 * where `a`, `b` are `dim * dim` row-major symmetric blocks.
 *
 * # Safety
 * `a`, `b` must point to `dim * dim` readable doubles and `out` be writable.
 */
enum FrStatus fr_daihs_distance(const double *a,
                                double gamma_a,
                                const double *b,
                                double gamma_b,
                                size_t dim,
                                double *out);

/**
 * Sectional curvature at `p` of the plane spanned by the symmetric
 * directions `x`, `y` (row-major, same dimension as `p`).
 *
 * # Safety
 * `p` must be a live handle, `x`, `y` must hold `dim(p)^2` doubles and `out`
 * be writable.
 */
enum FrStatus fr_sectional_curvature(const struct FrSpd *p,
                                     const double *x,
                                     const double *y,
                                     double *out);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len - 1` bytes). Returns the full message length in bytes,
 * 0 when there is none. `buf` may be null to query the length.
 *
 * # Safety
 * `buf` must be null or hold `len` writable bytes.
 */
size_t fr_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRGAUSS_H */
