#ifndef STATFIELD_H
#define STATFIELD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes of every fallible call.
typedef enum SfStatus {
  SF_STATUS_OK = 0,
  // A required pointer argument was null.
  SF_STATUS_NULL_POINTER = 1,
  // A string argument was not valid UTF-8.
  SF_STATUS_INVALID_UTF8 = 2,
  // An argument was out of range or inconsistent with a handle.
  SF_STATUS_INVALID_ARGUMENT = 3,
  // A measure was malformed or had an indefinite weight.
  SF_STATUS_INVALID_MEASURE = 4,
  // JSON input failed to parse or validate.
  SF_STATUS_CONFIG = 5,
  // An output buffer was too small.
  SF_STATUS_BUFFER_TOO_SMALL = 6,
  // A numerical routine could not produce a result.
  SF_STATUS_NUMERICAL = 7,
  // A size limit was exceeded.
  SF_STATUS_RESOURCE_LIMIT = 8,
  SF_STATUS_IO = 9,
  // An internal panic was caught at the boundary.
  SF_STATUS_INTERNAL = 10,
} SfStatus;

// Gramian orthogonally scattered measure realized by a seeded ensemble.
typedef struct SfGos SfGos;

// Uniform grid over `[-L, L)^d`.
typedef struct SfGrid SfGrid;

// Matrix-valued atomic spectral measure.
typedef struct SfMeasure SfMeasure;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sf_version(void);

// Message of the last failed call on this thread, or null. Valid until
// the next library call on the same thread.
const char *sf_last_error_message(void);

// Releases a string returned by the library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void sf_string_free(char *s);

// Creates a grid with `points_per_axis` points per axis over `[-half_width, half_width)^dim`.
//
// # Safety
// `out` must be a valid pointer.
enum SfStatus sf_grid_new(uintptr_t dim,
                          double half_width,
                          uintptr_t points_per_axis,
                          struct SfGrid **out);

// # Safety
// `grid` must be null or a live handle from [`sf_grid_new`].
void sf_grid_free(struct SfGrid *grid);

// Parses a measure from its JSON form
// `{"d":…, "n":…, "atoms":[{"omega":[…], "weight_re":[[…]], "weight_im":[[…]]}]}`.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a valid pointer.
enum SfStatus sf_measure_from_json(const char *json, struct SfMeasure **out);

// The three-atom reference measure on the line with 2x2 weights.
//
// # Safety
// `out` must be a valid pointer.
enum SfStatus sf_measure_fixture(struct SfMeasure **out);

// # Safety
// `measure` must be null or a live measure handle.
void sf_measure_free(struct SfMeasure *measure);

// Number of atoms, or 0 for a null handle.
//
// # Safety
// `measure` must be null or a live measure handle.
uintptr_t sf_measure_atom_count(const struct SfMeasure *measure);

// Dimension `n` of the value space, or 0 for a null handle.
//
// # Safety
// `measure` must be null or a live measure handle.
uintptr_t sf_measure_dim_h(const struct SfMeasure *measure);

// `K(phi)` for the bump of the given center and radius.
//
// # Safety
// Handles must be live, `center` must hold `dim` values and `re`, `im`
// must hold `len >= n * n` values.
enum SfStatus sf_k_of_bump(const struct SfMeasure *measure,
                           const struct SfGrid *grid,
                           const double *center,
                           double radius,
                           double *re,
                           double *im,
                           uintptr_t len);

// Covariance `Gamma(phi, psi) = K(phi * psi~)` of two bumps.
//
// # Safety
// As for [`sf_k_of_bump`], with two centers.
enum SfStatus sf_gamma_bumps(const struct SfMeasure *measure,
                             const struct SfGrid *grid,
                             const double *center_phi,
                             double radius_phi,
                             const double *center_psi,
                             double radius_psi,
                             double *re,
                             double *im,
                             uintptr_t len);

// Draws the gos measure of `measure` with `ensemble_size` samples from `seed`.
//
// # Safety
// `measure` must be live and `out` valid.
enum SfStatus sf_gos_new(const struct SfMeasure *measure,
                         uintptr_t ensemble_size,
                         uint64_t seed,
                         struct SfGos **out);

// # Safety
// `gos` must be null or a live gos handle.
void sf_gos_free(struct SfGos *gos);

// Ensemble size `M`, or 0 for a null handle.
//
// # Safety
// `gos` must be null or a live gos handle.
uintptr_t sf_gos_ensemble_size(const struct SfGos *gos);

// `xi(A)` for the atom set listed in `atoms`, written as `M * n` entries.
//
// # Safety
// `gos` must be live, `atoms` must hold `count` indices and `re`, `im`
// must hold `len` values.
enum SfStatus sf_gos_xi_of_set(const struct SfGos *gos,
                               const uintptr_t *atoms,
                               uintptr_t count,
                               double *re,
                               double *im,
                               uintptr_t len);

// The field `U_phi` at a bump, written as `M * n` entries.
//
// # Safety
// Handles must be live, `center` must hold `dim` values and `re`, `im`
// must hold `len` values.
enum SfStatus sf_gos_evaluate_bump(const struct SfGos *gos,
                                   const struct SfGrid *grid,
                                   const double *center,
                                   double radius,
                                   double *re,
                                   double *im,
                                   uintptr_t len);

// Runs a scenario given as JSON and returns the report as a JSON string.
// A scenario whose checks fail still returns `SF_STATUS_OK`; read
// `overall_pass` from the report.
//
// # Safety
// `config_json` must be a NUL-terminated string and `out_json` valid.
enum SfStatus sf_run_scenario(const char *config_json, char **out_json);

// Runs every registered check on the reference measure.
//
// # Safety
// `out_json` must be a valid pointer.
enum SfStatus sf_run_demo(uint64_t seed, uintptr_t ensemble_size, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STATFIELD_H */
