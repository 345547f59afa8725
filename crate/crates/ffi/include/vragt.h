#ifndef VRAGT_H
#define VRAGT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum VragtStatus {
  VRAGT_STATUS_OK = 0,
  VRAGT_STATUS_NULL_POINTER = 1,
  VRAGT_STATUS_INVALID_INPUT = 2,
  VRAGT_STATUS_INVALID_TOPOLOGY = 3,
  VRAGT_STATUS_INVALID_CONFIGURATION = 4,
  VRAGT_STATUS_UNSUPPORTED_CONFIGURATION = 5,
  VRAGT_STATUS_NUMERICAL_FAILURE = 6,
  VRAGT_STATUS_DIVERGENCE = 7,
  VRAGT_STATUS_INSUFFICIENT_DATA = 8,
  VRAGT_STATUS_IO = 9,
  VRAGT_STATUS_PARSE = 10,
  VRAGT_STATUS_PANIC = 11,
} VragtStatus;

// Directed communication graph.
typedef struct VragtGraph VragtGraph;

// Ridge-regression instance with its precomputed optimum.
typedef struct VragtProblem VragtProblem;

// Recorded checkpoints of one run.
typedef struct VragtTrajectory VragtTrajectory;

// `min(1, a / (c + k^e))`.
typedef struct VragtSchedule {
  double a;
  double c;
  double e;
} VragtSchedule;

typedef struct VragtRunParams {
  struct VragtSchedule alpha;
  struct VragtSchedule beta;
  struct VragtSchedule eta;
  double gamma;
  double sigma2_pull;
  double sigma2_push;
  double growth_pull;
  double growth_push;
  uint64_t iterations;
  uint64_t record_every;
  uint64_t seed;
} VragtRunParams;

typedef struct VragtRow {
  uint64_t k;
  double opt_gap;
  double consensus;
  double tracking;
  double conservation_residual;
} VragtRow;

typedef struct VragtRateFit {
  double k_lo;
  double k_hi;
  double slope;
  double intercept;
  double r_squared;
  size_t points;
} VragtRateFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *vragt_version(void);

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into the library on the same thread.
const char *vragt_last_error(void);

// Ring over `n` agents plus each other ordered pair with probability `p`.
//
// # Safety
// `out` must be valid for a pointer write.
enum VragtStatus vragt_graph_ring_plus_random(size_t n,
                                              double p,
                                              uint64_t seed,
                                              struct VragtGraph **out);

// Graph from `count` zero-based `(i, j)` pairs stored flat in `edges`;
// a pair means `j` sends to `i`.
//
// # Safety
// `edges` must point to `2 * count` readable values; `out` must be writable.
enum VragtStatus vragt_graph_from_edges(size_t n,
                                        const size_t *edges,
                                        size_t count,
                                        struct VragtGraph **out);

// # Safety
// `g` must be a live graph handle or null.
size_t vragt_graph_agents(const struct VragtGraph *g);

// # Safety
// `g` must be a live graph handle or null.
size_t vragt_graph_edge_count(const struct VragtGraph *g);

// Writes whether the pull graph `g_r` and the push graph `g_c` share a
// spanning-tree root.
//
// # Safety
// Both handles must be live; `pass` must be writable.
enum VragtStatus vragt_graph_check_roots(const struct VragtGraph *g_r,
                                         const struct VragtGraph *g_c,
                                         bool *pass);

// # Safety
// `g` must come from this library and not be freed twice.
void vragt_graph_free(struct VragtGraph *g);

// Random ridge instance with `x~` evenly spaced in `[lo, hi]^d`.
//
// # Safety
// `out` must be writable.
enum VragtStatus vragt_ridge_generate(size_t n,
                                      size_t d1,
                                      size_t d,
                                      double r,
                                      double lo,
                                      double hi,
                                      uint64_t seed,
                                      struct VragtProblem **out);

// # Safety
// `p` must be a live problem handle or null.
size_t vragt_ridge_dim(const struct VragtProblem *p);

// Copies the minimizer into `buf`, which must hold `vragt_ridge_dim(p)` values.
//
// # Safety
// `buf` must be writable for `len` values.
enum VragtStatus vragt_ridge_optimum(const struct VragtProblem *p, double *buf, size_t len);

// # Safety
// `p` must come from this library and not be freed twice.
void vragt_ridge_free(struct VragtProblem *p);

// Runs the algorithm on `g` with the weights built from it. An `eta`
// schedule equal to the constant 1 with constant `beta` and `alpha` gives
// R-Push-Pull.
//
// # Safety
// Handles and `params` must be live; `out` must be writable.
enum VragtStatus vragt_run(const struct VragtGraph *g,
                           const struct VragtProblem *p,
                           const struct VragtRunParams *params,
                           struct VragtTrajectory **out);

// # Safety
// `t` must be a live trajectory handle or null.
size_t vragt_trajectory_len(const struct VragtTrajectory *t);

// # Safety
// `t` must be live; `row` must be writable.
enum VragtStatus vragt_trajectory_row(const struct VragtTrajectory *t,
                                      size_t index,
                                      struct VragtRow *row);

// # Safety
// `t` must come from this library and not be freed twice.
void vragt_trajectory_free(struct VragtTrajectory *t);

// Least-squares line through `(ln k, ln value)` for `k` in `[k_lo, k_hi]`.
//
// # Safety
// `ks` and `values` must hold `len` values; `out` must be writable.
enum VragtStatus vragt_fit_rate(const double *ks,
                                const double *values,
                                size_t len,
                                double k_lo,
                                double k_hi,
                                struct VragtRateFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VRAGT_H */
