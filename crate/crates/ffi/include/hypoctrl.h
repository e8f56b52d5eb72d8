#ifndef HYPOCTRL_H
#define HYPOCTRL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Zero is success; everything else is a failure.
 */
typedef enum hc_status {
  HC_STATUS_OK = 0,
  HC_STATUS_NULL_POINTER = 1,
  HC_STATUS_INVALID_ARGUMENT = 2,
  HC_STATUS_UNKNOWN_MODEL = 3,
  HC_STATUS_DIMENSION = 4,
  HC_STATUS_NUMERICAL = 5,
  HC_STATUS_BUFFER_TOO_SMALL = 6,
  HC_STATUS_PANIC = 7,
} hc_status;

typedef struct hc_estimate_t hc_estimate_t;

typedef struct hc_model hc_model;

typedef struct hc_trajectory hc_trajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. Free with [`hc_string_free`].
 */
char *hc_last_error_message(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void hc_string_free(char *s);

/**
 * Creates a built-in model (`cyclic`, `fhn`, `synaptic`, `ou`).
 *
 * # Safety
 * `id` must be a NUL-terminated string and `out` a valid pointer.
 */
enum hc_status hc_model_new(const char *id, struct hc_model **out);

/**
 * # Safety
 * `model` must come from [`hc_model_new`] (or be NULL) and not be used afterwards.
 */
void hc_model_free(struct hc_model *model);

/**
 * Smooth, rough and observed dimensions, and the parameter count.
 *
 * # Safety
 * All pointers must be valid.
 */
enum hc_status hc_model_dims(const struct hc_model *model,
                             size_t *d_v,
                             size_t *d_u,
                             size_t *d_o,
                             size_t *n_params);

/**
 * Reference parameter values of a built-in model, in layout order.
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
enum hc_status hc_model_default_params(const struct hc_model *model, double *out, size_t cap);

/**
 * Euler–Maruyama simulation on `n` steps of `t_end / n`. Passing `n_params = 0`
 * uses the model's reference parameters.
 *
 * # Safety
 * Buffers must hold the stated number of values; `out` must be valid.
 */
enum hc_status hc_simulate(const struct hc_model *model,
                           const double *params,
                           size_t n_params,
                           const double *z0,
                           size_t n_z0,
                           double t_end,
                           size_t n,
                           uint64_t seed,
                           struct hc_trajectory **out);

/**
 * # Safety
 * `traj` must come from [`hc_simulate`] (or be NULL) and not be used afterwards.
 */
void hc_trajectory_free(struct hc_trajectory *traj);

/**
 * Number of grid points (`n + 1`) and the step.
 *
 * # Safety
 * All pointers must be valid.
 */
enum hc_status hc_trajectory_shape(const struct hc_trajectory *traj, size_t *points, double *dt);

/**
 * Copies the states, `points × d` row-major.
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
enum hc_status hc_trajectory_states(const struct hc_trajectory *traj, double *out, size_t cap);

/**
 * Copies the observations, `points × d_o` row-major.
 *
 * # Safety
 * `out` must hold `cap` doubles.
 */
enum hc_status hc_trajectory_observations(const struct hc_trajectory *traj,
                                          double *out,
                                          size_t cap);

/**
 * Fits the parameters for each weight and keeps the one picked by the
 * control-norm criterion. `y` holds `rows × d_o` observations row-major. A null
 * `z0` profiles the initial state; `n_init = 0` starts from the reference values.
 *
 * # Safety
 * Buffers must hold the stated number of values; `out` must be valid.
 */
enum hc_status hc_estimate(const struct hc_model *model,
                           const double *y,
                           size_t rows,
                           double dt,
                           const double *weights,
                           size_t n_weights,
                           const double *init,
                           size_t n_init,
                           const double *z0,
                           size_t n_z0,
                           struct hc_estimate_t **out);

/**
 * # Safety
 * `est` must come from [`hc_estimate`] (or be NULL) and not be used afterwards.
 */
void hc_estimate_free(struct hc_estimate_t *est);

/**
 * Estimated parameters in layout order and the selected weight.
 *
 * # Safety
 * `params` must hold `cap` doubles; `w_hat` must be valid.
 */
enum hc_status hc_estimate_params(const struct hc_estimate_t *est,
                                  double *params,
                                  size_t cap,
                                  double *w_hat);

/**
 * Full report as JSON, or NULL on failure. Free with [`hc_string_free`].
 *
 * # Safety
 * `est` must be a valid handle.
 */
char *hc_estimate_json(const struct hc_estimate_t *est);

/**
 * Contrast lag and smallest singular value of the rank check along a simulated
 * path of `n` steps. Reports `Numerical` when a smooth coordinate is unreachable.
 *
 * # Safety
 * Buffers must hold the stated number of values; outputs must be valid.
 */
enum hc_status hc_check_hypo(const struct hc_model *model,
                             const double *params,
                             size_t n_params,
                             const double *z0,
                             size_t n_z0,
                             double t_end,
                             size_t n,
                             uint64_t seed,
                             size_t *m_b,
                             double *min_singular_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPOCTRL_H */
