#ifndef COALESCENT_H
#define COALESCENT_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CoalescentStatus {
  COALESCENT_STATUS_OK = 0,
  COALESCENT_STATUS_NULL_POINTER = 1,
  COALESCENT_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or an unusable configuration.
   */
  COALESCENT_STATUS_INVALID_INPUT = 3,
  /**
   * Arguments outside the domain of the function.
   */
  COALESCENT_STATUS_DOMAIN = 4,
  /**
   * Quadrature or ODE integration did not reach its tolerance.
   */
  COALESCENT_STATUS_NUMERICAL = 5,
  /**
   * An enumeration or simulation hit its size cap.
   */
  COALESCENT_STATUS_SIZE_CAP = 6,
  COALESCENT_STATUS_IO = 7,
  COALESCENT_STATUS_PANIC = 8,
  /**
   * The run completed but a verification band was missed.
   */
  COALESCENT_STATUS_VERIFICATION_FAILED = 9,
} CoalescentStatus;

/**
 * Opaque branching mechanism.
 */
typedef struct CoalescentMechanism CoalescentMechanism;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next call on the same thread.
 */
const char *coalescent_last_error(void);

/**
 * Parses a mechanism from its JSON form.
 *
 * # Safety
 * `json` must be a nul-terminated string and `out` a valid pointer.
 */
enum CoalescentStatus coalescent_mechanism_from_json(const char *json,
                                                     struct CoalescentMechanism **out);

/**
 * Feller mechanism `β λ²` in one type.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CoalescentStatus coalescent_mechanism_feller(double beta, struct CoalescentMechanism **out);

/**
 * # Safety
 * `m` must come from one of the constructors and not be freed twice. Null is a no-op.
 */
void coalescent_mechanism_free(struct CoalescentMechanism *m);

/**
 * Number of types, or 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t coalescent_mechanism_dim(const struct CoalescentMechanism *m);

/**
 * `ψ(λ)`, written to `out[0..d]`.
 *
 * # Safety
 * `lambda` and `out` must point to `d` doubles.
 */
enum CoalescentStatus coalescent_psi(const struct CoalescentMechanism *m,
                                     const double *lambda,
                                     size_t d,
                                     double *out);

/**
 * `u(t, λ)`, written to `out[0..d]`.
 *
 * # Safety
 * `lambda` and `out` must point to `d` doubles.
 */
enum CoalescentStatus coalescent_solve_u(const struct CoalescentMechanism *m,
                                         double t,
                                         const double *lambda,
                                         size_t d,
                                         double *out);

/**
 * Local merger rate at population `x` for `k` lineages: `alpha` of them,
 * carried by a type-`c` parent (0-based), merge into one.
 *
 * # Safety
 * `x`, `k` and `alpha` must point to `d` values; `out` to one double.
 */
enum CoalescentStatus coalescent_merger_rate(const struct CoalescentMechanism *m,
                                             const double *x,
                                             const uint32_t *k,
                                             const uint32_t *alpha,
                                             size_t d,
                                             size_t c,
                                             double *out);

/**
 * Probability that `k` individuals sampled at `horizon` from a one-type
 * population started at `x` share one ancestor at time 0.
 *
 * # Safety
 * `out` must point to one double.
 */
enum CoalescentStatus coalescent_mrca_probability(const struct CoalescentMechanism *m,
                                                  uint32_t k,
                                                  double horizon,
                                                  double x,
                                                  double *out);

/**
 * Runs a JSON experiment config and returns the rendered table in `*out`,
 * to be released with [`coalescent_string_free`]. A missed verification
 * band still fills `*out` and returns `VerificationFailed`.
 *
 * # Safety
 * `config` must be a nul-terminated string and `out` a valid pointer.
 */
enum CoalescentStatus coalescent_run_config(const char *config, char **out);

/**
 * # Safety
 * `s` must come from this library and not be freed twice. Null is a no-op.
 */
void coalescent_string_free(char *s);

/**
 * Library version as a static string.
 */
const char *coalescent_version(void);

/**
 * `1` when the status is `Ok`.
 */
int coalescent_status_ok(enum CoalescentStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COALESCENT_H */
