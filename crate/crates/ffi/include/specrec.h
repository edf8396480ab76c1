#ifndef SPECREC_H
#define SPECREC_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. The numeric values of the first four
 * match the command-line exit codes.
 */
typedef enum SpecrecStatus {
  SPECREC_STATUS_OK = 0,
  SPECREC_STATUS_VALIDATION = 2,
  SPECREC_STATUS_NUMERICAL = 3,
  SPECREC_STATUS_IO = 4,
  SPECREC_STATUS_NULL_POINTER = 5,
  SPECREC_STATUS_PANIC = 6,
} SpecrecStatus;

/**
 * Result of a recovery run.
 */
typedef struct SpecrecReport SpecrecReport;

/**
 * Sorted, nonnegative spectrum.
 */
typedef struct SpecrecSpectrum SpecrecSpectrum;

/**
 * Options for the closed-form correction.
 */
typedef struct SpecrecAsymptoticOptions {
  /**
   * Nearest neighbours left out of each correction sum.
   */
  size_t neighbor_exclusion;
  /**
   * 0: contracting (default), 1: expanding.
   */
  int32_t sign;
  double denominator_guard;
  double clamp_floor;
} SpecrecAsymptoticOptions;

/**
 * Options for the fixed-point iteration.
 */
typedef struct SpecrecFixedPointOptions {
  size_t max_iterations;
  size_t replicates;
  double tolerance;
  uint64_t seed;
  /**
   * 0: asymptotic correction, 1: the sample spectrum.
   */
  int32_t init;
  bool evaluate_residual;
} SpecrecFixedPointOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or null. The string is
 * owned by the library and valid until the next failing call on this
 * thread.
 */
const char *specrec_last_error_message(void);

/**
 * Build a spectrum from `len` values (sorted on entry).
 */
enum SpecrecStatus specrec_spectrum_new(const double *values,
                                        size_t len,
                                        struct SpecrecSpectrum **out);

/**
 * Number of eigenvalues; 0 for a null handle.
 */
size_t specrec_spectrum_len(const struct SpecrecSpectrum *spectrum);

/**
 * Copy the eigenvalues (nonincreasing) into `out`, which holds `capacity`
 * doubles.
 */
enum SpecrecStatus specrec_spectrum_values(const struct SpecrecSpectrum *spectrum,
                                           double *out,
                                           size_t capacity);

void specrec_spectrum_free(struct SpecrecSpectrum *spectrum);

/**
 * Synthetic spectrum of family `kind` (e.g. `"convex_power"`), with
 * `n_params` named overrides.
 */
enum SpecrecStatus specrec_generate(const char *kind,
                                    size_t p,
                                    const char *const *param_names,
                                    const double *param_values,
                                    size_t n_params,
                                    struct SpecrecSpectrum **out);

/**
 * Sample spectrum of `n` Gaussian observations with covariance spectrum
 * `truth`.
 */
enum SpecrecStatus specrec_sample_spectrum(const struct SpecrecSpectrum *truth,
                                           size_t n,
                                           uint64_t seed,
                                           struct SpecrecSpectrum **out);

struct SpecrecAsymptoticOptions specrec_asymptotic_options_default(void);

struct SpecrecFixedPointOptions specrec_fixed_point_options_default(void);

/**
 * Closed-form correction. `options` may be null for the defaults.
 */
enum SpecrecStatus specrec_correct_asymptotic(const struct SpecrecSpectrum *sample,
                                              size_t n,
                                              const struct SpecrecAsymptoticOptions *options,
                                              struct SpecrecReport **out);

/**
 * Fixed-point recovery. `options` may be null for the defaults.
 */
enum SpecrecStatus specrec_recover_fixed_point(const struct SpecrecSpectrum *sample,
                                               size_t n,
                                               const struct SpecrecFixedPointOptions *options,
                                               struct SpecrecReport **out);

/**
 * Fixed-point recovery on a problem reduced by `factor`, with the largest
 * `top_preserve` eigenvalues taken from the closed-form correction.
 */
enum SpecrecStatus specrec_recover_scaled(const struct SpecrecSpectrum *sample,
                                          size_t n,
                                          size_t factor,
                                          size_t top_preserve,
                                          const struct SpecrecFixedPointOptions *options,
                                          struct SpecrecReport **out);

/**
 * Copy of the recovered spectrum.
 */
enum SpecrecStatus specrec_report_spectrum(const struct SpecrecReport *report,
                                           struct SpecrecSpectrum **out);

/**
 * Number of warnings attached to the report; 0 for a null handle.
 */
size_t specrec_report_warning_count(const struct SpecrecReport *report);

/**
 * Whether the input looked like the sample spectrum of a flat truth.
 */
bool specrec_report_has_flat_warning(const struct SpecrecReport *report);

/**
 * The full report as JSON. Release with [`specrec_string_free`].
 */
enum SpecrecStatus specrec_report_to_json(const struct SpecrecReport *report, char **out);

void specrec_report_free(struct SpecrecReport *report);

void specrec_string_free(char *s);

/**
 * Maximum relative error over entries above `threshold` and maximum
 * absolute error over the rest.
 */
enum SpecrecStatus specrec_error_metrics(const struct SpecrecSpectrum *truth,
                                         const struct SpecrecSpectrum *estimate,
                                         double threshold,
                                         double *max_relative_error,
                                         double *max_absolute_error_small);

/**
 * Marchenko-Pastur density at `x` for ratio `r` in (0, 1].
 */
enum SpecrecStatus specrec_mp_density(double x, double r, double *out);

/**
 * Marchenko-Pastur CDF at `x` for ratio `r` in (0, 1].
 */
enum SpecrecStatus specrec_mp_cdf(double x, double r, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECREC_H */
