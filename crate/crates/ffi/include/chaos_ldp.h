#ifndef CHAOS_LDP_H
#define CHAOS_LDP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success.
 */
typedef enum ChaosLdpStatus {
  CHAOS_LDP_STATUS_OK = 0,
  CHAOS_LDP_STATUS_NULL_POINTER = 1,
  CHAOS_LDP_STATUS_INVALID_UTF8 = 2,
  CHAOS_LDP_STATUS_CONFIG = 3,
  CHAOS_LDP_STATUS_PARSE = 4,
  CHAOS_LDP_STATUS_DIMENSION = 5,
  CHAOS_LDP_STATUS_NUMERICAL = 6,
  CHAOS_LDP_STATUS_EFFECTIVE_SAMPLE_SIZE = 7,
  CHAOS_LDP_STATUS_IO = 8,
  CHAOS_LDP_STATUS_BUFFER_TOO_SMALL = 9,
  CHAOS_LDP_STATUS_PANIC = 10,
} ChaosLdpStatus;

/**
 * Values of the `direction` argument of [`chaos_ldp_estimate_threshold`].
 */
typedef enum ChaosLdpDirection {
  CHAOS_LDP_DIRECTION_ABOVE = 0,
  CHAOS_LDP_DIRECTION_BELOW = 1,
} ChaosLdpDirection;

/**
 * Built kernel family: grid, sites and chaos kernels.
 */
typedef struct ChaosLdpSpec ChaosLdpSpec;

/**
 * Monte Carlo estimate of an event probability.
 */
typedef struct ChaosLdpEstimate {
  double estimate;
  double stderr;
  double log_estimate;
  double ess;
  size_t hits;
  size_t samples;
  bool reliable;
} ChaosLdpEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call on the same thread.
 */
const char *chaos_ldp_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chaos_ldp_version(void);

/**
 * Build a spec from a run-config JSON document (its `grid`, `family` and
 * `rate_solver` sections). Relative kernel paths resolve against
 * `base_dir`, or the working directory when it is null.
 *
 * # Safety
 * `json` and a non-null `base_dir` must be NUL-terminated strings; `out`
 * must be writable.
 */
enum ChaosLdpStatus chaos_ldp_spec_from_json(const char *json,
                                             const char *base_dir,
                                             struct ChaosLdpSpec **out);

/**
 * Release a spec. Null is ignored.
 *
 * # Safety
 * `spec` must come from [`chaos_ldp_spec_from_json`] and not be used again.
 */
void chaos_ldp_spec_free(struct ChaosLdpSpec *spec);

/**
 * Number of grid cells, the length of a control vector.
 *
 * # Safety
 * `spec` must be a live handle and `out` writable.
 */
enum ChaosLdpStatus chaos_ldp_spec_cells(const struct ChaosLdpSpec *spec, size_t *out);

/**
 * Number of sites, the length of a path value.
 *
 * # Safety
 * `spec` must be a live handle and `out` writable.
 */
enum ChaosLdpStatus chaos_ldp_spec_sites(const struct ChaosLdpSpec *spec, size_t *out);

/**
 * Skeleton `X^u` at every site for the control `u` (one value per cell).
 *
 * # Safety
 * `u` must hold `u_len` doubles and `out` room for `out_len` doubles.
 */
enum ChaosLdpStatus chaos_ldp_skeleton(const struct ChaosLdpSpec *spec,
                                       const double *u,
                                       size_t u_len,
                                       double *out,
                                       size_t out_len);

/**
 * Pointwise rate `inf { |u|^2 / 2 : X^u(site) = level }`; `+inf` when the
 * level is certified unreachable. When `u_out` is non-null the optimal
 * control is written there (zeros if none exists).
 *
 * # Safety
 * `lambda` must be writable; a non-null `u_out` must hold `u_len` doubles.
 */
enum ChaosLdpStatus chaos_ldp_rate_pointwise(const struct ChaosLdpSpec *spec,
                                             size_t site,
                                             double level,
                                             double *lambda,
                                             bool *converged,
                                             double *u_out,
                                             size_t u_len);

/**
 * `P(X^eps(site) >= level)` (or `<=`, per a [`ChaosLdpDirection`] value)
 * by Monte Carlo with `samples` paths.
 * With `tilted`, the noise is shifted toward the optimal control(s) and
 * reweighted.
 *
 * # Safety
 * `spec` must be a live handle and `out` writable.
 */
enum ChaosLdpStatus chaos_ldp_estimate_threshold(const struct ChaosLdpSpec *spec,
                                                 size_t site,
                                                 double level,
                                                 uint32_t direction,
                                                 double eps,
                                                 size_t samples,
                                                 uint64_t seed,
                                                 bool tilted,
                                                 struct ChaosLdpEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHAOS_LDP_H */
