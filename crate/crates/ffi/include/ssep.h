#ifndef SSEP_H
#define SSEP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SsepStatus {
  SSEP_STATUS_OK = 0,
  SSEP_STATUS_NULL_POINTER = 1,
  SSEP_STATUS_VALIDATION = 2,
  SSEP_STATUS_NON_CONVERGENCE = 3,
  SSEP_STATUS_RESOURCE = 4,
  SSEP_STATUS_PANIC = 5,
  SSEP_STATUS_NUMERIC = 6,
  SSEP_STATUS_IO = 7,
} SsepStatus;

// Meeting-kernel ladder for one starting pair.
typedef struct SsepLadder SsepLadder;

// Exact two-particle absorption probabilities.
typedef struct SsepPairAbsorption SsepPairAbsorption;

// Exact stationary law of a small system.
typedef struct SsepStationary SsepStationary;

// Scalar summary of a ladder.
typedef struct SsepLadderSummary {
  double p0;
  double p_inf;
  double bound;
  double slack;
} SsepLadderSummary;

// Estimate with its standard error.
typedef struct SsepEstimate {
  double mean;
  double std_error;
  uint64_t samples;
} SsepEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after success.
// The pointer stays valid until the next call on the same thread.
const char *ssep_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ssep_version(void);

// Solves the exact stationary law for `size <= 20`.
enum SsepStatus ssep_stationary_new(size_t size,
                                    double rate,
                                    double tol,
                                    struct SsepStationary **out);

// Probability of the configuration with bit `i - 1` of `mask` set for
// each occupied site `i`.
enum SsepStatus ssep_stationary_probability(const struct SsepStationary *handle,
                                            uint64_t mask,
                                            double *out);

// Stationary expectation of the product of occupations at `points`.
enum SsepStatus ssep_stationary_moment(const struct SsepStationary *handle,
                                       const size_t *points,
                                       size_t n,
                                       double *out);

void ssep_stationary_free(struct SsepStationary *handle);

// Solves the two-particle absorption problem on every pair.
enum SsepStatus ssep_pair_absorption_new(size_t size,
                                         double rate,
                                         double tol,
                                         struct SsepPairAbsorption **out);

// Absorption probability from `(x, y)`, `0 <= x < y <= size + 1`.
enum SsepStatus ssep_pair_absorption_get(const struct SsepPairAbsorption *handle,
                                         size_t x,
                                         size_t y,
                                         double *out);

void ssep_pair_absorption_free(struct SsepPairAbsorption *handle);

// Builds the ladder from `(x0, y0)` to depth `k_max`.
enum SsepStatus ssep_ladder_new(size_t size,
                                double rate,
                                size_t x0,
                                size_t y0,
                                size_t k_max,
                                double tol,
                                struct SsepLadder **out);

// Number of rungs `k = 1..depth` available.
enum SsepStatus ssep_ladder_depth(const struct SsepLadder *handle, size_t *out);

// Rung `k` (1-based): `C_k`, `gamma_k` and `P_k`.
enum SsepStatus ssep_ladder_row(const struct SsepLadder *handle,
                                size_t k,
                                double *c,
                                double *gamma,
                                double *p);

enum SsepStatus ssep_ladder_summary(const struct SsepLadder *handle, struct SsepLadderSummary *out);

void ssep_ladder_free(struct SsepLadder *handle);

// Monte Carlo probability that the dual started at `points` ends with
// every particle stuck at the right reservoir.
enum SsepStatus ssep_dual_absorption(size_t size,
                                     double rate,
                                     uint64_t seed,
                                     const size_t *points,
                                     size_t n,
                                     uint64_t replicas,
                                     struct SsepEstimate *out);

// Forward Monte Carlo of the product of occupations at `points` at time
// `t`, started from `initial` (`size` bytes).
enum SsepStatus ssep_transient_moment(size_t size,
                                      double rate,
                                      uint64_t seed,
                                      const uint8_t *initial,
                                      const size_t *points,
                                      size_t n,
                                      double t,
                                      uint64_t replicas,
                                      struct SsepEstimate *out);

// Dual Monte Carlo of the same quantity as [`ssep_transient_moment`].
enum SsepStatus ssep_transient_dual_moment(size_t size,
                                           double rate,
                                           uint64_t seed,
                                           const uint8_t *initial,
                                           const size_t *points,
                                           size_t n,
                                           double t,
                                           uint64_t replicas,
                                           struct SsepEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSEP_H */
