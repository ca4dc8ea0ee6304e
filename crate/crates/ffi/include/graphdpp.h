#ifndef GRAPHDPP_H
#define GRAPHDPP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes of every fallible call.
typedef enum GdppStatus {
  GDPP_STATUS_OK = 0,
  GDPP_STATUS_NULL_POINTER = 1,
  GDPP_STATUS_INVALID_PARAMS = 2,
  GDPP_STATUS_OUT_OF_RANGE = 3,
  GDPP_STATUS_TOO_LARGE = 4,
  GDPP_STATUS_NO_CONVERGENCE = 5,
  GDPP_STATUS_NUMERICAL_DEGENERACY = 6,
  GDPP_STATUS_BUFFER_TOO_SMALL = 7,
  GDPP_STATUS_INTERNAL = 8,
} GdppStatus;

// Opaque graph handle.
typedef struct GdppGraph GdppGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be null or valid for `cap` bytes.
size_t gdpp_last_error_message(char *buf, size_t cap);

// Builds a weighted undirected graph from `n_edges` edges `(src[e], dst[e])`.
// `weights` may be null for unit weights.
//
// # Safety
// Edge arrays must hold `n_edges` entries; `out` must be writable.
enum GdppStatus gdpp_graph_from_edges(size_t n,
                                      const size_t *src,
                                      const size_t *dst,
                                      const double *weights,
                                      size_t n_edges,
                                      struct GdppGraph **out);

// Draws a stochastic block model graph with `n` nodes, `communities`
// equal blocks, mean degree `c` and probability ratio `epsilon`.
//
// # Safety
// `out` must be writable.
enum GdppStatus gdpp_graph_sbm(size_t n,
                               size_t communities,
                               double c,
                               double epsilon,
                               uint64_t seed,
                               struct GdppGraph **out);

// Releases a graph. Null is ignored.
//
// # Safety
// `g` must come from a `gdpp_graph_*` constructor and not be used afterwards.
void gdpp_graph_free(struct GdppGraph *g);

// Number of nodes, 0 for a null handle.
//
// # Safety
// `g` must be null or a live handle.
size_t gdpp_graph_num_nodes(const struct GdppGraph *g);

// Number of undirected edges, 0 for a null handle.
//
// # Safety
// `g` must be null or a live handle.
size_t gdpp_graph_num_edges(const struct GdppGraph *g);

// Detectability threshold of the block model with mean degree `c` and
// `k` communities.
//
// # Safety
// `out` must be writable.
enum GdppStatus gdpp_critical_epsilon(double c, size_t k, double *out);

// Roots of one Wilson random forest with absorption weight `q`. Writes the
// node count to `len_out` and the nodes to `nodes_out` (capacity `cap`;
// `N` always suffices).
//
// # Safety
// `nodes_out` must be valid for `cap` entries; `len_out` must be writable.
enum GdppStatus gdpp_wilson_sample(const struct GdppGraph *g,
                                   double q,
                                   uint64_t seed,
                                   size_t *nodes_out,
                                   size_t cap,
                                   size_t *len_out);

// Tunes `q` so that the mean Wilson sample size over `runs` runs is within
// `tol * target_k` of `target_k`.
//
// # Safety
// `q_out` must be writable.
enum GdppStatus gdpp_tune_q(const struct GdppGraph *g,
                            size_t target_k,
                            size_t runs,
                            double tol,
                            uint64_t seed,
                            double *q_out);

// Exact sample of the projection DPP onto the first `k` Laplacian
// eigenvectors. Always yields `k` nodes. `weights_out` may be null;
// otherwise it receives the inclusion probabilities of the sampled nodes.
//
// # Safety
// Output buffers must be valid for `cap` entries; `len_out` must be writable.
enum GdppStatus gdpp_dpp_lowpass_sample(const struct GdppGraph *g,
                                        size_t k,
                                        uint64_t seed,
                                        size_t *nodes_out,
                                        double *weights_out,
                                        size_t cap,
                                        size_t *len_out);

// Polynomial sketch estimate of the Wilson inclusion probabilities for
// weight `q`. `sketch_width = 0` selects the default width.
//
// # Safety
// `out` must be valid for `len` entries, `len` must equal the node count.
enum GdppStatus gdpp_estimate_pi(const struct GdppGraph *g,
                                 double q,
                                 size_t degree,
                                 size_t sketch_width,
                                 uint64_t seed,
                                 double *out,
                                 size_t len);

// Laplacian-regularised recovery from `m` samples `y` at `nodes`.
// `weights` (inclusion probabilities) may be null for unweighted fitting.
//
// # Safety
// Input arrays must hold `m` entries; `out` must hold `len >= N` entries.
enum GdppStatus gdpp_recover_unknown_basis(const struct GdppGraph *g,
                                           const size_t *nodes,
                                           const double *weights,
                                           const double *y,
                                           size_t m,
                                           double gamma,
                                           uint32_t r,
                                           double tol,
                                           double *out,
                                           size_t len);

// Least-squares recovery in the span of the first `k` Laplacian
// eigenvectors, reweighted when `weights` is non-null.
//
// # Safety
// Input arrays must hold `m` entries; `out` must hold `len >= N` entries.
enum GdppStatus gdpp_recover_known_basis(const struct GdppGraph *g,
                                         size_t k,
                                         const size_t *nodes,
                                         const double *weights,
                                         const double *y,
                                         size_t m,
                                         double *out,
                                         size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPHDPP_H */
