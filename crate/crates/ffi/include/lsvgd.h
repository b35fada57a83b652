/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef LSVGD_H
#define LSVGD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Forward models with a built-in default setup.
typedef enum LsvgdPdeKind {
  LSVGD_PDE_KIND_HEAT_SOURCE = 0,
  LSVGD_PDE_KIND_DIFFUSION = 1,
} LsvgdPdeKind;

// Result code of every fallible call.
typedef enum LsvgdStatus {
  LSVGD_STATUS_OK = 0,
  LSVGD_STATUS_NULL_POINTER = 1,
  LSVGD_STATUS_INVALID_INPUT = 2,
  LSVGD_STATUS_DEGENERATE_BANDWIDTH = 3,
  LSVGD_STATUS_NON_FINITE_SCORE = 4,
  LSVGD_STATUS_SINGULAR_INPUT = 5,
  LSVGD_STATUS_INVALID_COEFFICIENT = 6,
  LSVGD_STATUS_NUMERICAL = 7,
  LSVGD_STATUS_CONFIG = 8,
  LSVGD_STATUS_IO = 9,
  LSVGD_STATUS_PARSE = 10,
  LSVGD_STATUS_BUFFER_TOO_SMALL = 11,
  LSVGD_STATUS_PANIC = 12,
} LsvgdStatus;

// A resolved experiment configuration.
typedef struct LsvgdConfig LsvgdConfig;

// A forward model `f: R^d -> R^n`.
typedef struct LsvgdModel LsvgdModel;

// The outcome of a finished experiment.
typedef struct LsvgdRun LsvgdRun;

// A trained surrogate network.
typedef struct LsvgdSurrogate LsvgdSurrogate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, as a static NUL-terminated string.
const char *lsvgd_version(void);

// Message of the last failed call on this thread, or an empty string.
// The pointer stays valid until the next call into the library on the same
// thread.
const char *lsvgd_last_error(void);

// Creates the analytic double banana model (`d = 2`, `n = 1`).
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum LsvgdStatus lsvgd_model_double_banana(struct LsvgdModel **out);

// Creates a fractional PDE model with its default discretization and sensors.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum LsvgdStatus lsvgd_model_pde(enum LsvgdPdeKind kind, struct LsvgdModel **out);

// # Safety
// `model` must come from a model constructor and not be used afterwards.
void lsvgd_model_free(struct LsvgdModel *model);

// Input dimension `d`, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t lsvgd_model_input_dim(const struct LsvgdModel *model);

// Output dimension `n`, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t lsvgd_model_output_dim(const struct LsvgdModel *model);

// Number of counted evaluations made through this handle.
//
// # Safety
// `model` must be null or a live handle.
uint64_t lsvgd_model_eval_count(const struct LsvgdModel *model);

// Evaluates `f(x)` into `y`. Counted.
//
// # Safety
// `x` must hold `x_len` values and `y` room for `y_len`.
enum LsvgdStatus lsvgd_model_evaluate(const struct LsvgdModel *model,
                                      const double *x,
                                      size_t x_len,
                                      double *y,
                                      size_t y_len);

// Exact Jacobian (`n x d`, row-major) into `jac`. Models without one
// report `LSVGD_STATUS_INVALID_INPUT`.
//
// # Safety
// `x` must hold `x_len` values and `jac` room for `jac_len`.
enum LsvgdStatus lsvgd_model_jacobian(const struct LsvgdModel *model,
                                      const double *x,
                                      size_t x_len,
                                      double *jac,
                                      size_t jac_len);

// Loads a surrogate saved as JSON (for example a run's `surrogate.json`).
//
// # Safety
// `path` must be a NUL-terminated string and `out` writable.
enum LsvgdStatus lsvgd_surrogate_load(const char *path, struct LsvgdSurrogate **out);

// # Safety
// `s` must come from [`lsvgd_surrogate_load`] and not be used afterwards.
void lsvgd_surrogate_free(struct LsvgdSurrogate *s);

// # Safety
// `s` must be null or a live handle.
size_t lsvgd_surrogate_input_dim(const struct LsvgdSurrogate *s);

// # Safety
// `s` must be null or a live handle.
size_t lsvgd_surrogate_output_dim(const struct LsvgdSurrogate *s);

// Network prediction at `x`.
//
// # Safety
// `x` must hold `x_len` values and `y` room for `y_len`.
enum LsvgdStatus lsvgd_surrogate_predict(const struct LsvgdSurrogate *s,
                                         const double *x,
                                         size_t x_len,
                                         double *y,
                                         size_t y_len);

// Network Jacobian with respect to its input (`n x d`, row-major).
//
// # Safety
// `x` must hold `x_len` values and `jac` room for `jac_len`.
enum LsvgdStatus lsvgd_surrogate_input_jacobian(const struct LsvgdSurrogate *s,
                                                const double *x,
                                                size_t x_len,
                                                double *jac,
                                                size_t jac_len);

// Median-heuristic kernel bandwidth of `n` points in `d` dimensions.
//
// # Safety
// `points` must hold `n * d` values; `h` must be writable.
enum LsvgdStatus lsvgd_median_bandwidth(const double *points, size_t n, size_t d, double *h);

// SVGD update direction for `n` particles given their scores, with the
// median bandwidth. All arrays are `n x d`.
//
// # Safety
// `points` and `scores` must hold `n * d` values, `out` room for `n * d`.
enum LsvgdStatus lsvgd_svgd_direction(const double *points,
                                      const double *scores,
                                      size_t n,
                                      size_t d,
                                      double *out);

// MMD between `samples` (`n x d`) and `reference` (`m x d`), with the
// bandwidth taken from the reference.
//
// # Safety
// The arrays must hold `n * d` and `m * d` values; `value` must be writable.
enum LsvgdStatus lsvgd_mmd(const double *samples,
                           size_t n,
                           const double *reference,
                           size_t m,
                           size_t d,
                           double *value);

// Parses a JSON experiment config. Missing fields take the defaults of the
// named problem and method. The config is validated.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum LsvgdStatus lsvgd_config_from_json(const char *json, struct LsvgdConfig **out);

// # Safety
// `cfg` must come from [`lsvgd_config_from_json`] and not be used afterwards.
void lsvgd_config_free(struct LsvgdConfig *cfg);

// Runs the experiment and writes its output directory.
//
// # Safety
// `cfg` must be a live handle and `out` writable.
enum LsvgdStatus lsvgd_run(const struct LsvgdConfig *cfg, struct LsvgdRun **out);

// # Safety
// `run` must come from [`lsvgd_run`] and not be used afterwards.
void lsvgd_run_free(struct LsvgdRun *run);

// Number of particles in the final set.
//
// # Safety
// `run` must be null or a live handle.
size_t lsvgd_run_particle_count(const struct LsvgdRun *run);

// # Safety
// `run` must be null or a live handle.
size_t lsvgd_run_dim(const struct LsvgdRun *run);

// Online high-fidelity evaluations spent by the run.
//
// # Safety
// `run` must be null or a live handle.
uint64_t lsvgd_run_online_evals(const struct LsvgdRun *run);

// Offline (initial design) evaluations spent by the run.
//
// # Safety
// `run` must be null or a live handle.
uint64_t lsvgd_run_offline_evals(const struct LsvgdRun *run);

// Copies the final particles (`count x dim`, row-major) into `buf`.
//
// # Safety
// `buf` must have room for `len` values.
enum LsvgdStatus lsvgd_run_particles(const struct LsvgdRun *run, double *buf, size_t len);

// Copies the posterior mean (`dim` values) into `buf`.
//
// # Safety
// `buf` must have room for `len` values.
enum LsvgdStatus lsvgd_run_posterior_mean(const struct LsvgdRun *run, double *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LSVGD_H */
