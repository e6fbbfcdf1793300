#ifndef KPMATCH_H
#define KPMATCH_H

/* Generated by cbindgen from kpmatch-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum KpmStatus {
  KPM_STATUS_OK = 0,
  KPM_STATUS_INVALID_ARGUMENT = 1,
  KPM_STATUS_PARSE_ERROR = 2,
  // The search completed and proved that no perfect matching exists.
  KPM_STATUS_NO_MATCHING = 3,
  KPM_STATUS_TIMEOUT = 4,
  // A parity obstruction certifies non-matchability.
  KPM_STATUS_OBSTRUCTED = 5,
  // The requested procedure ran but did not produce a matching.
  KPM_STATUS_FAILURE = 6,
} KpmStatus;

typedef enum KpmTheoremCase {
  KPM_THEOREM_CASE_CASE_I = 0,
  KPM_THEOREM_CASE_CASE_II = 1,
  KPM_THEOREM_CASE_NO_OBSTRUCTION = 2,
} KpmTheoremCase;

// Opaque graph handle.
typedef struct KpmGraph KpmGraph;

// Message for the most recent error on this thread. Borrowed pointer: valid
// until the next failing call on the same thread; do not free.
const char *kpm_last_error_message(void);

// Create an empty graph with `k` classes of `n` vertices.
//
// # Safety
// `out` must be a valid pointer to a `KpmGraph*` slot.
enum KpmStatus kpm_graph_new(size_t k, size_t n, struct KpmGraph **out);

// Create the complete graph (every legal tuple an edge).
//
// # Safety
// `out` must be a valid pointer to a `KpmGraph*` slot.
enum KpmStatus kpm_graph_complete(size_t k, size_t n, struct KpmGraph **out);

// Create the parity template: edges are the legal tuples meeting the first
// `d[c]` locals of each class an even number of times.
//
// # Safety
// `d` must point to `d_len` readable `size_t` values; `out` must be valid.
enum KpmStatus kpm_graph_template(size_t k,
                                  size_t n,
                                  const size_t *d,
                                  size_t d_len,
                                  struct KpmGraph **out);

// Parse the text instance format (`k n` header, one edge per line).
//
// # Safety
// `text` must be a valid NUL-terminated string; `out` must be valid.
enum KpmStatus kpm_graph_parse(const char *text, struct KpmGraph **out);

// Read an instance file.
//
// # Safety
// `path` must be a valid NUL-terminated string; `out` must be valid.
enum KpmStatus kpm_graph_read_file(const char *path, struct KpmGraph **out);

// Render the instance text format; free with `kpm_string_free`.
//
// # Safety
// `graph` must be a live handle from this library.
char *kpm_graph_render(const struct KpmGraph *graph);

// Destroy a graph handle.
//
// # Safety
// `graph` must be a handle from this library, not yet freed; NULL is a no-op.
void kpm_graph_free(struct KpmGraph *graph);

// Free a string returned by this library.
//
// # Safety
// `s` must come from this library and not have been freed; NULL is a no-op.
void kpm_string_free(char *s);

// Free an index buffer returned by this library.
//
// # Safety
// `ptr`/`len` must describe a buffer returned by this library, unfreed.
void kpm_buffer_free(size_t *ptr, size_t len);

// # Safety
// `graph` must be a live handle.
size_t kpm_graph_k(const struct KpmGraph *graph);

// # Safety
// `graph` must be a live handle.
size_t kpm_graph_n(const struct KpmGraph *graph);

// # Safety
// `graph` must be a live handle.
size_t kpm_graph_edge_count(const struct KpmGraph *graph);

// Insert one edge given as `k` local indices in class order.
//
// # Safety
// `graph` must be live and mutable (no concurrent readers); `tuple` must
// point to `len` readable values.
enum KpmStatus kpm_graph_add_edge(struct KpmGraph *graph, const size_t *tuple, size_t len);

// # Safety
// `graph` must be live; `tuple` must point to `len` readable values;
// `out` must be valid.
enum KpmStatus kpm_graph_has_edge(const struct KpmGraph *graph,
                                  const size_t *tuple,
                                  size_t len,
                                  bool *out);

// Minimum degree over legal (k-1)-sets.
//
// # Safety
// `graph` must be live; `out` must be valid.
enum KpmStatus kpm_min_codegree(const struct KpmGraph *graph, size_t *out);

// Complete search for a perfect matching. On `Ok`, `*out_edges` holds
// `*out_size * k` locals (row-major, class order); free with
// `kpm_buffer_free(ptr, size * k)`. Returns `NoMatching` when the search
// proves none exists, `Timeout` otherwise.
//
// # Safety
// `graph` must be live; `out_edges` and `out_size` must be valid.
enum KpmStatus kpm_find_perfect_matching(const struct KpmGraph *graph,
                                         uint64_t timeout_secs,
                                         bool use_memo,
                                         size_t **out_edges,
                                         size_t *out_size);

// Exact maximum matching; same buffer contract as
// `kpm_find_perfect_matching`.
//
// # Safety
// `graph` must be live; `out_edges` and `out_size` must be valid.
enum KpmStatus kpm_max_matching(const struct KpmGraph *graph,
                                uint64_t timeout_secs,
                                size_t **out_edges,
                                size_t *out_size);

// Parity certificate as JSON (`{"sets": ..., "sizes": ...}`), or NULL when
// no certificate exists. Free with `kpm_string_free`.
//
// # Safety
// `graph` must be live.
char *kpm_parity_certificate_json(const struct KpmGraph *graph);

// Classify against the two non-matchable template shapes.
//
// # Safety
// `graph` must be live; `out` must be valid.
enum KpmStatus kpm_theorem_case(const struct KpmGraph *graph, enum KpmTheoremCase *out);

// Run the staged template matcher; `*out_report` receives the JSON report
// (free with `kpm_string_free`). Returns `Ok` when a verified matching was
// found, `Obstructed` for a parity obstruction (the report is then the
// certificate), `Failure` when a stage failed (the report names it).
//
// # Safety
// `graph` must be live; `out_report` must be valid.
enum KpmStatus kpm_pipeline_json(const struct KpmGraph *graph,
                                 double alpha,
                                 double epsilon,
                                 uint64_t seed,
                                 char **out_report);

// Run the absorbing-family matcher; `*out_report` receives the JSON report
// (free with `kpm_string_free`).
//
// # Safety
// `graph` must be live; `out_report` must be valid.
enum KpmStatus kpm_absorb_json(const struct KpmGraph *graph,
                               uint64_t seed,
                               size_t max_samples,
                               char **out_report);

#endif /* KPMATCH_H */
