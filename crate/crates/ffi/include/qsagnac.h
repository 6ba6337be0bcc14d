#ifndef QSAGNAC_H
#define QSAGNAC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QsStatus {
  QS_STATUS_OK = 0,
  QS_STATUS_NULL_POINTER = 1,
  QS_STATUS_INVALID_INPUT = 2,
  QS_STATUS_FIT_FAILED = 3,
  QS_STATUS_ILL_CONDITIONED = 4,
  QS_STATUS_DEGENERATE_DESIGN = 5,
  QS_STATUS_UNDEFINED_RATIO = 6,
  QS_STATUS_INFEASIBLE = 7,
  QS_STATUS_IO = 8,
  QS_STATUS_PANIC = 9,
} QsStatus;

/**
 * Geometry plus rates, noise and plan, all at their defaults except what
 * the constructor sets.
 */
typedef struct QsExperiment QsExperiment;

/**
 * Loop geometry.
 */
typedef struct QsGeometry QsGeometry;

/**
 * Simulated count records.
 */
typedef struct QsRecords QsRecords;

typedef struct QsCountRecord {
  double theta;
  double phi0;
  /**
   * 1 for the full-area state, 0 for the cancelled one.
   */
  uint8_t switch_on;
  double duration;
  uint64_t n_h;
  uint64_t n_v;
  uint64_t n_hv;
} QsCountRecord;

typedef struct QsEarthPhase {
  double phi_on;
  double phi_on_sigma;
  double phi_off;
  double phi_off_sigma;
  double phi_e;
  double phi_e_sigma;
} QsEarthPhase;

typedef struct QsRingDesign {
  double fiber_length;
  uint32_t turns;
  double side;
  double scale_factor;
  double delta_omega;
} QsRingDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length, or 0 if none.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t qs_last_error_message(char *buf, size_t len);

/**
 * The 2 km, 715 m^2 loop at 1546 nm, frame angle zero.
 */
struct QsGeometry *qs_geometry_vienna(void);

/**
 * Square frame wound with `turns` turns of `fiber_length` metres.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum QsStatus qs_geometry_square(double fiber_length,
                                 uint32_t turns,
                                 double wavelength,
                                 struct QsGeometry **out);

/**
 * # Safety
 * `geom` must be null or a handle from this library, not yet freed.
 */
void qs_geometry_free(struct QsGeometry *geom);

/**
 * Sets the angle (rad) between the loop normal and the Earth axis.
 *
 * # Safety
 * `geom` must be a live handle.
 */
enum QsStatus qs_geometry_set_frame_angle(struct QsGeometry *geom, double frame_angle);

/**
 * # Safety
 * `geom` must be a live handle and `out` valid for writes.
 */
enum QsStatus qs_scale_factor(const struct QsGeometry *geom, double *out);

/**
 * One-photon Sagnac phase at rotation rate `omega` for the given switch state.
 *
 * # Safety
 * `geom` must be a live handle and `out` valid for writes.
 */
enum QsStatus qs_sagnac_phase(const struct QsGeometry *geom,
                              double omega,
                              uint8_t switch_on,
                              double *out);

/**
 * Experiment with default rates and noise, `record_time` seconds per bias phase.
 *
 * # Safety
 * `geom` must be a live handle and `out` valid for writes.
 */
enum QsStatus qs_experiment_new(const struct QsGeometry *geom,
                                double record_time,
                                struct QsExperiment **out);

/**
 * # Safety
 * `exp` must be null or a live handle.
 */
void qs_experiment_free(struct QsExperiment *exp);

/**
 * Disables every noise source except Poisson counting.
 *
 * # Safety
 * `exp` must be a live handle.
 */
enum QsStatus qs_experiment_silence(struct QsExperiment *exp);

/**
 * Simulates counts for a probe of `photons` photons (1 for a heralded
 * single photon) at `n_phases` bias phases.
 *
 * # Safety
 * `exp` must be a live handle, `phi0` valid for `n_phases` reads and
 * `out` valid for writes.
 */
enum QsStatus qs_simulate_counts(const struct QsExperiment *exp,
                                 uint32_t photons,
                                 const double *phi0,
                                 size_t n_phases,
                                 uint64_t seed,
                                 struct QsRecords **out);

/**
 * # Safety
 * `recs` must be null or a live handle.
 */
void qs_records_free(struct QsRecords *recs);

/**
 * Number of records, 0 for a null handle.
 *
 * # Safety
 * `recs` must be null or a live handle.
 */
size_t qs_records_len(const struct QsRecords *recs);

/**
 * # Safety
 * `recs` must be a live handle and `out` valid for writes.
 */
enum QsStatus qs_records_get(const struct QsRecords *recs, size_t index, struct QsCountRecord *out);

/**
 * Fits both switch states and extracts the Earth phase. With
 * `mc_samples > 0` the sigmas come from a Monte-Carlo run seeded by `seed`,
 * otherwise from the fit covariances.
 *
 * # Safety
 * `recs` must be a live handle and `out` valid for writes.
 */
enum QsStatus qs_fit_earth_phase(const struct QsRecords *recs,
                                 uint32_t photons,
                                 size_t mc_samples,
                                 double motor_sigma,
                                 uint64_t seed,
                                 struct QsEarthPhase *out);

/**
 * Smallest square ring reaching `target_snr` against the general-relativistic
 * rate, for the 10 GHz, 0.16 dB/km two-photon design at latitude `latitude` (rad).
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum QsStatus qs_optimize_gfring(double target_snr,
                                 double latitude,
                                 double integration_time,
                                 struct QsRingDesign *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QSAGNAC_H */
