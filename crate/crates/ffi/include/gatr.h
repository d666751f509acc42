#ifndef GATR_H
#define GATR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GatrStatus {
  GATR_STATUS_OK = 0,
  GATR_STATUS_NULL_POINTER = 1,
  GATR_STATUS_INVALID_ARGUMENT = 2,
  GATR_STATUS_IO = 3,
  GATR_STATUS_FORMAT = 4,
  GATR_STATUS_RUNTIME = 5,
  GATR_STATUS_PANIC = 6,
} GatrStatus;

/**
 * A trained model loaded from a checkpoint.
 */
typedef struct GatrModel GatrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *gatr_last_error(void);

/**
 * # Safety
 * `a`, `b` and `out` must point to 16 doubles each.
 */
enum GatrStatus gatr_geometric_product(const double *a, const double *b, double *out);

/**
 * # Safety
 * `a`, `b` and `out` must point to 16 doubles each.
 */
enum GatrStatus gatr_wedge(const double *a, const double *b, double *out);

/**
 * # Safety
 * `a`, `b` and `out` must point to 16 doubles each.
 */
enum GatrStatus gatr_join(const double *a, const double *b, double *out);

/**
 * # Safety
 * `a` and `b` must point to 16 doubles each and `out` to one double.
 */
enum GatrStatus gatr_inner(const double *a, const double *b, double *out);

/**
 * # Safety
 * `x` and `out` must point to 16 doubles each.
 */
enum GatrStatus gatr_dual(const double *x, double *out);

/**
 * Applies the versor `u` to `x` by the sandwich product. The parity of `u`
 * is read off its grades; mixed-parity input is rejected.
 *
 * # Safety
 * `u`, `x` and `out` must point to 16 doubles each.
 */
enum GatrStatus gatr_sandwich(const double *u, const double *x, double *out);

/**
 * # Safety
 * `p` must point to 3 doubles and `out` to 16.
 */
enum GatrStatus gatr_embed_point(const double *p, double *out);

/**
 * # Safety
 * `t` must point to 3 doubles and `out` to 16.
 */
enum GatrStatus gatr_embed_translation(const double *t, double *out);

/**
 * Fails with `InvalidArgument` for points at infinity.
 *
 * # Safety
 * `x` must point to 16 doubles and `out` to 3.
 */
enum GatrStatus gatr_extract_point(const double *x, double *out);

/**
 * Loads a checkpoint written by `gatr train`. On success `*out` owns a new
 * handle.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GatrStatus gatr_model_load(const char *path, struct GatrModel **out);

/**
 * # Safety
 * `model` must come from [`gatr_model_load`] and not be used afterwards.
 * Null is ignored.
 */
void gatr_model_free(struct GatrModel *model);

/**
 * Number of trainable values, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t gatr_model_param_count(const struct GatrModel *model);

/**
 * Number of bodies the model accepts, or 0 if it accepts any count.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t gatr_model_fixed_bodies(const struct GatrModel *model);

/**
 * Predicts final positions of `n_samples` systems of `n_bodies` bodies.
 * `masses` holds `n_samples * n_bodies` values, `pos`, `vel` and `out_pos`
 * hold `n_samples * n_bodies * 3` values (x, y, z per body).
 *
 * # Safety
 * All pointers must be valid for the sizes above and `model` a live handle.
 */
enum GatrStatus gatr_model_predict(const struct GatrModel *model,
                                   size_t n_samples,
                                   size_t n_bodies,
                                   const double *masses,
                                   const double *pos,
                                   const double *vel,
                                   double *out_pos);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GATR_H */
