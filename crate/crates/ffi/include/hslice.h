#ifndef HSLICE_H
#define HSLICE_H

#include <stddef.h>
#include <stdint.h>

/*
 Result codes of every exported function.
 */
typedef enum HsStatus {
  HS_STATUS_OK = 0,
  /*
   Bad argument, including null pointers and malformed points.
   */
  HS_STATUS_INVALID_ARGUMENT = 1,
  HS_STATUS_DIMENSION_MISMATCH = 2,
  HS_STATUS_OUT_OF_DOMAIN = 3,
  HS_STATUS_TOO_FEW_SAMPLES = 4,
  HS_STATUS_NO_CONVERGENCE = 5,
  HS_STATUS_IO = 6,
  HS_STATUS_PARSE = 7,
  HS_STATUS_FAILED = 8,
  HS_STATUS_PANIC = 9,
} HsStatus;

/*
 Graph families accepted by [`hs_graph_new_family`].
 */
typedef enum HsFamily {
  HS_FAMILY_VERTICAL_PLANE = 0,
  HS_FAMILY_SMOOTH_BUMP = 1,
  HS_FAMILY_RANDOM_LIPSCHITZ = 2,
} HsFamily;

/*
 Opaque intrinsic Lipschitz graph.
 */
typedef struct HsGraph HsGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer is
 valid until the next call into the library on the same thread.
 */
const char *hs_last_error(void);

/*
 Frees a string returned by this library. Null is ignored.

 # Safety
 `s` must be null or a string obtained from this library and not yet freed.
 */
void hs_string_free(char *s);

/*
 `out = a · b` in `H_n`.

 # Safety
 `a`, `b` and `out` must each hold `2n + 1` doubles.
 */
enum HsStatus hs_group_mul(size_t n, const double *a, const double *b, double *out);

/*
 `out = a⁻¹`.

 # Safety
 `a` and `out` must each hold `2n + 1` doubles.
 */
enum HsStatus hs_group_inv(size_t n, const double *a, double *out);

/*
 `out = δ_t(a)`.

 # Safety
 `a` and `out` must each hold `2n + 1` doubles.
 */
enum HsStatus hs_dilate(size_t n, double t, const double *a, double *out);

/*
 Korányi gauge distance between `a` and `b`.

 # Safety
 `a` and `b` must each hold `2n + 1` doubles; `out` one double.
 */
enum HsStatus hs_gauge_dist(size_t n, const double *a, const double *b, double *out);

/*
 Projection of `p` along the horizontal direction `w` (a point with
 `y_n = 1`, `z = 0`) onto the hyperplane `{y_n = 0}`.

 # Safety
 `w`, `p` and `out` must each hold `2n + 1` doubles.
 */
enum HsStatus hs_project_along(size_t n, const double *w, const double *p, double *out);

/*
 Builds a test graph over `{y_n = 0}` and stores a new handle in `out`.
 The handle must be released with [`hs_graph_free`].

 # Safety
 `out` must be valid for one write.
 */
enum HsStatus hs_graph_new_family(enum HsFamily family,
                                  size_t n,
                                  double lambda,
                                  uint64_t seed,
                                  size_t resolution,
                                  struct HsGraph **out);

/*
 Loads a graph from the JSON container format.

 # Safety
 `json` must be a NUL-terminated string and `out` valid for one write.
 */
enum HsStatus hs_graph_from_json(const char *json, struct HsGraph **out);

/*
 Serializes a graph to the JSON container format. Free the result with
 [`hs_string_free`].

 # Safety
 `g` must be a live handle and `out` valid for one write.
 */
enum HsStatus hs_graph_to_json(const struct HsGraph *g, char **out);

/*
 Releases a graph handle. Null is ignored.

 # Safety
 `g` must be null or a handle from this library that was not yet freed.
 */
void hs_graph_free(struct HsGraph *g);

/*
 Dimension `n` of the graph's group, or 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
size_t hs_graph_n(const struct HsGraph *g);

/*
 Point of the graph above `v`, a point with `y_n = 0`.

 # Safety
 `g` must be a live handle; `v` and `out` must each hold `2n + 1` doubles.
 */
enum HsStatus hs_graph_point(const struct HsGraph *g, const double *v, double *out);

/*
 Monte Carlo beta number of the graph at the graph point `x` and radius
 `r`, from `samples` proposals.

 # Safety
 `g` must be a live handle, `x` must hold `2n + 1` doubles, and
 `value`/`stderr` must each be valid for one write.
 */
enum HsStatus hs_beta_number(const struct HsGraph *g,
                             const double *x,
                             double r,
                             size_t samples,
                             uint64_t seed,
                             double *value,
                             double *stderr);

/*
 Runs the Carleson experiment for a JSON run configuration (an empty
 string selects the defaults) and returns the JSON report. Free the result
 with [`hs_string_free`].

 # Safety
 `config_json` must be a NUL-terminated string and `out` valid for one write.
 */
enum HsStatus hs_run_carleson(const char *config_json, char **out);

/*
 As [`hs_run_carleson`], for the slice theta experiment.

 # Safety
 `config_json` must be a NUL-terminated string and `out` valid for one write.
 */
enum HsStatus hs_run_theta(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HSLICE_H */
