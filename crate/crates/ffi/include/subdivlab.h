#ifndef SUBDIVLAB_H
#define SUBDIVLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum SdlStatus {
  SDL_STATUS_OK = 0,
  SDL_STATUS_NULL_POINTER = 1,
  SDL_STATUS_NULL_TRIANGLE = 2,
  SDL_STATUS_DEGENERATE_QUADRILATERAL = 3,
  SDL_STATUS_NON_CONVEX = 4,
  SDL_STATUS_ZERO_DISPLACEMENT = 5,
  SDL_STATUS_DEGENERATE_CHILD = 6,
  SDL_STATUS_ZERO_SPREAD = 7,
  SDL_STATUS_OUT_OF_DOMAIN = 8,
  SDL_STATUS_NON_CONVERGENCE = 9,
  SDL_STATUS_EMPTY_SAMPLE = 10,
  SDL_STATUS_TOO_FEW_SAMPLES = 11,
  SDL_STATUS_INVALID_ARGUMENT = 12,
  SDL_STATUS_PANIC = 13,
} SdlStatus;

/**
 * Opaque random source.
 */
typedef struct SdlRandom SdlRandom;

typedef struct SdlVec2 {
  double x;
  double y;
} SdlVec2;

/**
 * Apex of a triangle whose longest side is `(0,0)-(1,0)`.
 */
typedef struct SdlShape {
  double x;
  double y;
} SdlShape;

/**
 * Angles normalised to sum 1.
 */
typedef struct SdlAngles {
  double a;
  double b;
  double c;
} SdlAngles;

/**
 * Vertices `a, b, c, d` in counter-clockwise order.
 */
typedef struct SdlQuad {
  struct SdlVec2 a;
  struct SdlVec2 b;
  struct SdlVec2 c;
  struct SdlVec2 d;
} SdlQuad;

/**
 * Pair of side vectors; `d = v - u` is tracked exactly.
 */
typedef struct SdlPair {
  struct SdlVec2 u;
  struct SdlVec2 v;
  struct SdlVec2 d;
  uint64_t step;
} SdlPair;

typedef struct SdlMoments {
  double mean_a;
  double second_a;
  double cross_ab;
  double var_a;
  double cov_ab;
  double stderr_mean;
  double stderr_second;
  double stderr_cross;
  uint64_t n_samples;
} SdlMoments;

typedef struct SdlUniforms {
  double xi_a;
  double xi_b;
  double xi_c;
} SdlUniforms;

/**
 * Per-step quantities of the subtriangle chain.
 */
typedef struct SdlStepInfo {
  double r;
  double area_ratio;
  double longest_side;
  double mu;
  double nu;
  double delta;
} SdlStepInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static, NUL-terminated description of `status`.
 */
const char *sdl_status_message(enum SdlStatus status);

/**
 * New random source for (`seed`, `stream`). Free with [`sdl_random_free`].
 */
struct SdlRandom *sdl_random_new(uint64_t seed, uint64_t stream);

/**
 * Releases a handle from [`sdl_random_new`]; null is ignored.
 *
 * # Safety
 * `rng` must be null or a live handle not used afterwards.
 */
void sdl_random_free(struct SdlRandom *rng);

/**
 * Next uniform in `[0, 1)`.
 *
 * # Safety
 * `rng` must be null or a live handle; `out` must be null or writable.
 */
enum SdlStatus sdl_random_uniform(struct SdlRandom *rng, double *out);

/**
 * Shape coordinates of the triangle `a b c`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_shape_from_vertices(struct SdlVec2 a,
                                       struct SdlVec2 b,
                                       struct SdlVec2 c,
                                       struct SdlShape *out);

/**
 * Euclidean distance between two angle triples.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_simplex_distance(struct SdlAngles u, struct SdlAngles v, double *out);

/**
 * Pair state from the horizontal sides `(B - A, C - D)` of `q`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_pair_from_quad(struct SdlQuad q, struct SdlPair *out);

/**
 * One step of the pair recursion: `coin = false` keeps `u`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_pair_step(struct SdlPair s, bool coin, struct SdlPair *out);

/**
 * Child `index` in `0..4` of `q`, doubled about its centroid.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_quad_child(struct SdlQuad q, uint32_t index, struct SdlQuad *out);

/**
 * Normalised distance of `q` from a parallelogram.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_parallelogram_defect(struct SdlQuad q, double *out);

/**
 * The six bisector children of `t`, written to `out[0..6]`.
 *
 * # Safety
 * `out` must be null or point to six writable elements.
 */
enum SdlStatus sdl_bisector_children(struct SdlAngles t, struct SdlAngles *out);

/**
 * Mean log Lipschitz ratio of the six maps on the pair `u, v`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_pairwise_contraction(struct SdlAngles u, struct SdlAngles v, double *out);

/**
 * Moments of one angle after `steps` steps of `replicas` chains.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_estimate_moments(uint64_t steps,
                                    uint64_t replicas,
                                    uint64_t seed,
                                    struct SdlMoments *out);

/**
 * One subtriangle step; `info` may be null.
 *
 * # Safety
 * `out` must be null or writable; `info` must be null or writable.
 */
enum SdlStatus sdl_subtriangle_step(struct SdlShape s,
                                    struct SdlUniforms xi,
                                    struct SdlShape *out,
                                    struct SdlStepInfo *info);

/**
 * `I1, I2, I3` at apex abscissa `x`, written to `out[0..3]`.
 *
 * # Safety
 * `out` must be null or point to three writable elements.
 */
enum SdlStatus sdl_closed_form_i(double x, double xi_a, double xi_b, double *out);

/**
 * `E[r(x,0) | xi_a, xi_b]`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_cond_r_given_ab(double x, double xi_a, double xi_b, double *out);

/**
 * `E[r(x,0) | xi_a]`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_cond_r_given_a(double x, double xi_a, double *out);

/**
 * `E log S` for a flat triangle with apex at `x`.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_expected_log_s(double x, double *out);

/**
 * `E log R`.
 */
double sdl_expected_log_r(void);

/**
 * Position of `xi_c` within the child's longest side.
 *
 * # Safety
 * `out` must be null or writable.
 */
enum SdlStatus sdl_chi(double mu, double nu, double xi_c, double *out);

/**
 * The three terms of `P(chi <= z)` at apex `x`, written to `out[0..3]`.
 *
 * # Safety
 * `out` must be null or point to three writable elements.
 */
enum SdlStatus sdl_chi_cdf_terms(double x, double z, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBDIVLAB_H */
