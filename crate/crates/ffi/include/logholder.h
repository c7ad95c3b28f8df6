#ifndef LOGHOLDER_H
#define LOGHOLDER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LhStatus {
  LH_STATUS_OK = 0,
  LH_STATUS_NULL_POINTER = 1,
  LH_STATUS_INVALID_INPUT = 2,
  LH_STATUS_BUDGET_EXCEEDED = 3,
  LH_STATUS_INVARIANT_VIOLATION = 4,
  LH_STATUS_BAND_ISOLATION_FAILURE = 5,
  LH_STATUS_QUADRATURE_FAILURE = 6,
  LH_STATUS_INDEX_OUT_OF_RANGE = 7,
  LH_STATUS_PANIC = 8,
} LhStatus;

/**
 * Band edges of a potential together with its exact IDS.
 */
typedef struct LhBands LhBands;

/**
 * A periodic potential.
 */
typedef struct LhPotential LhPotential;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies `len` values into a new potential handle stored in `*out`.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` must be writable.
 */
enum LhStatus lh_potential_new(const double *values, size_t len, struct LhPotential **out);

/**
 * # Safety
 * `pot` must come from `lh_potential_new` and not be freed twice. Null is
 * ignored.
 */
void lh_potential_free(struct LhPotential *pot);

/**
 * Period of the potential, or 0 for a null handle.
 *
 * # Safety
 * `pot` must be null or a live handle.
 */
size_t lh_potential_period(const struct LhPotential *pot);

/**
 * Discriminant and its energy derivative.
 *
 * # Safety
 * `pot` must be a live handle; `d` and `d_prime` must be writable.
 */
enum LhStatus lh_discriminant(const struct LhPotential *pot,
                              double energy,
                              double *d,
                              double *d_prime);

/**
 * # Safety
 * `pot` must be a live handle and `out` writable.
 */
enum LhStatus lh_lyapunov(const struct LhPotential *pot, double energy, double *out);

/**
 * Computes the band structure of `pot` into a new handle.
 *
 * # Safety
 * `pot` must be a live handle and `out` writable.
 */
enum LhStatus lh_bands_new(const struct LhPotential *pot, struct LhBands **out);

/**
 * # Safety
 * `bands` must come from `lh_bands_new` and not be freed twice. Null is
 * ignored.
 */
void lh_bands_free(struct LhBands *bands);

/**
 * Number of bands, or 0 for a null handle.
 *
 * # Safety
 * `bands` must be null or a live handle.
 */
size_t lh_bands_count(const struct LhBands *bands);

/**
 * Edges of band `index` (from 0, ascending).
 *
 * # Safety
 * `bands` must be a live handle; `lower` and `upper` must be writable.
 */
enum LhStatus lh_bands_get(const struct LhBands *bands, size_t index, double *lower, double *upper);

/**
 * Lebesgue measure of the spectrum.
 *
 * # Safety
 * `bands` must be a live handle and `out` writable.
 */
enum LhStatus lh_bands_measure(const struct LhBands *bands, double *out);

/**
 * Integrated density of states at `energy`.
 *
 * # Safety
 * `bands` must be a live handle and `out` writable.
 */
enum LhStatus lh_ids(const struct LhBands *bands, double energy, double *out);

/**
 * Copies the last error message of this thread into `buf` as a
 * NUL-terminated string, truncated to `cap - 1` bytes. Returns the full
 * message length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `cap` writable bytes.
 */
size_t lh_last_error_message(char *buf, size_t cap);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LOGHOLDER_H */
