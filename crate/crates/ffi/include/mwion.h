#ifndef MWION_H
#define MWION_H

/* Generated by cbindgen from crates/ffi; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MwionStatus {
  MWION_STATUS_OK = 0,
  MWION_STATUS_NULL_POINTER = 1,
  MWION_STATUS_INVALID_ARGUMENT = 2,
  MWION_STATUS_CONVERGENCE = 3,
  MWION_STATUS_INSUFFICIENT_SPECTRUM = 4,
  MWION_STATUS_NO_THRESHOLD = 5,
  MWION_STATUS_IO = 6,
  MWION_STATUS_INTERNAL = 7,
  MWION_STATUS_PANIC = 8,
} MwionStatus;

/**
 * Opaque pipeline for one initial state, frequency and interaction time.
 */
typedef struct MwionPipeline MwionPipeline;

/**
 * Solver settings; obtain defaults from [`mwion_settings_default`].
 */
typedef struct MwionSettings {
  /**
   * Basis size as a multiple of `n0`.
   */
  double basis_per_level;
  double theta;
  uint32_t margin;
  double window_photons;
  uint32_t eigs_per_shift;
  double tol;
  /**
   * Use the dense solver instead of shift-invert Arnoldi.
   */
  bool dense;
} MwionSettings;

/**
 * Result of a threshold search. Fields other than `converged` and
 * `n_photons` are NaN when no threshold was found.
 */
typedef struct MwionThreshold {
  double f0_threshold;
  double p_at_threshold;
  uint32_t n_photons;
  double xi;
  double shannon;
  double bracket_low;
  double bracket_high;
  bool converged;
} MwionThreshold;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *mwion_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mwion_version(void);

struct MwionSettings mwion_settings_default(void);

/**
 * Minimal number of photons lifting `n0` above `−1/(2 n_eff²)`.
 */
uint32_t mwion_photon_number(uint32_t n0, double n_eff, double omega);

/**
 * # Safety
 * `out` must be null or point to writable storage for one `double`.
 */
enum MwionStatus mwion_localization_length(double f0, double omega0, uint32_t n0, double *out);

/**
 * # Safety
 * `weights` must point to `len` readable doubles; `out` must be writable.
 */
enum MwionStatus mwion_shannon_width(const double *weights, size_t len, double *out);

/**
 * Creates a pipeline for level `n0` at scaled frequency `omega0`, interaction
 * time `t_cycles` field periods and effective threshold `n_eff`.
 *
 * # Safety
 * `settings` must be null (defaults) or point to a valid [`MwionSettings`];
 * `out` must be writable. On success `*out` owns a handle that must be freed
 * with [`mwion_pipeline_free`].
 */
enum MwionStatus mwion_pipeline_new(uint32_t n0,
                                    double omega0,
                                    double t_cycles,
                                    double n_eff,
                                    const struct MwionSettings *settings,
                                    struct MwionPipeline **out);

/**
 * Ionization probability at scaled field `f0`; optionally the Shannon width
 * of the decomposition.
 *
 * # Safety
 * `handle` must come from [`mwion_pipeline_new`] and not be freed;
 * `p_ion` must be writable; `shannon` may be null.
 */
enum MwionStatus mwion_pipeline_pion(const struct MwionPipeline *handle,
                                     double f0,
                                     double *p_ion,
                                     double *shannon);

/**
 * # Safety
 * `handle` must be null or a handle from [`mwion_pipeline_new`] not yet freed.
 */
void mwion_pipeline_free(struct MwionPipeline *handle);

/**
 * Threshold search with default search settings. A missing crossing is
 * reported as `MWION_STATUS_NO_THRESHOLD` with `*out` still filled.
 *
 * # Safety
 * `settings` may be null; `out` must be writable.
 */
enum MwionStatus mwion_find_threshold(uint32_t n0,
                                      double omega0,
                                      double t_cycles,
                                      double n_eff,
                                      const struct MwionSettings *settings,
                                      struct MwionThreshold *out);

/**
 * Grid-propagation reference with the default grid for the level.
 *
 * # Safety
 * `out` must be writable.
 */
enum MwionStatus mwion_oracle_pion(uint32_t n0,
                                   double omega0,
                                   double f0,
                                   double t_cycles,
                                   double n_eff,
                                   double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MWION_H */
