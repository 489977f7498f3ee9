#ifndef LEVYCOUPLING_H
#define LEVYCOUPLING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LcStatus {
  LC_STATUS_OK = 0,
  LC_STATUS_NULL_POINTER = 1,
  LC_STATUS_INVALID_PARAMETER = 2,
  LC_STATUS_DOMAIN = 3,
  LC_STATUS_QUADRATURE = 4,
  LC_STATUS_PRECONDITION = 5,
  LC_STATUS_DIVERGENCE = 6,
  LC_STATUS_CERTIFICATE_UNAVAILABLE = 7,
  LC_STATUS_CONFIG = 8,
  LC_STATUS_IO = 9,
  LC_STATUS_OTHER = 10,
  LC_STATUS_PANIC = 11,
} LcStatus;

typedef enum LcSupport {
  LC_SUPPORT_FULL_SPACE = 0,
  LC_SUPPORT_BALL = 1,
  LC_SUPPORT_HALF_SLAB = 2,
  LC_SUPPORT_SLAB = 3,
} LcSupport;

typedef enum LcDriftKind {
  LC_DRIFT_KIND_ZERO = 0,
  LC_DRIFT_KIND_LINEAR = 1,
  LC_DRIFT_KIND_SIN_PERTURBED = 2,
  LC_DRIFT_KIND_SIGN_PERTURBED = 3,
  LC_DRIFT_KIND_HOLDER_PERTURBED = 4,
} LcDriftKind;

typedef enum LcDiffusionKind {
  LC_DIFFUSION_KIND_CONSTANT = 0,
  LC_DIFFUSION_KIND_DIAGONAL_SIN = 1,
  LC_DIFFUSION_KIND_ROTATION = 2,
} LcDiffusionKind;

/**
 * Opaque coupling kernel.
 */
typedef struct LcCouplingKernel LcCouplingKernel;

/**
 * Opaque Lévy measure.
 */
typedef struct LcLevyModel LcLevyModel;

/**
 * Drift preset; `beta` is read only by the Hölder preset.
 */
typedef struct LcDrift {
  enum LcDriftKind kind;
  double rate;
  double amp;
  double beta;
} LcDrift;

/**
 * Diffusion preset; `scale` is read by `Constant`, `base`/`amp` by the
 * others, `angle` by `Rotation`.
 */
typedef struct LcDiffusion {
  enum LcDiffusionKind kind;
  double scale;
  double base;
  double amp;
  double angle;
} LcDiffusion;

/**
 * Simulation parameters for [`lc_coupling_survival`].
 */
typedef struct LcSimParams {
  double horizon;
  double dt_max;
  double trunc;
  uint64_t seed;
  uintptr_t n_paths;
} LcSimParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *lc_version(void);

/**
 * Copies the calling thread's last error message into `buf` (truncated,
 * always NUL-terminated when `len > 0`) and returns the full message
 * length in bytes, excluding the terminator.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
uintptr_t lc_last_error_message(char *buf, uintptr_t len);

/**
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum LcStatus lc_levy_model_new(uintptr_t dim,
                                double alpha,
                                double c0,
                                double eta,
                                enum LcSupport support,
                                struct LcLevyModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `lc_levy_model_new` not yet freed.
 */
void lc_levy_model_free(struct LcLevyModel *model);

/**
 * Builds a kernel from a model (copied, so the model handle stays owned
 * by the caller), coefficient presets and the threshold κ.
 *
 * # Safety
 * `model` must be a live model handle and `out` writable.
 */
enum LcStatus lc_kernel_new(const struct LcLevyModel *model,
                            struct LcDrift drift,
                            struct LcDiffusion diffusion,
                            double kappa,
                            struct LcCouplingKernel **out);

/**
 * Builds the kernel described by the model, coefficient and coupling
 * sections of a TOML experiment config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
enum LcStatus lc_kernel_from_config(const char *toml, struct LcCouplingKernel **out);

/**
 * # Safety
 * `kernel` must be null or a live kernel handle.
 */
void lc_kernel_free(struct LcCouplingKernel *kernel);

/**
 * # Safety
 * `kernel` must be a live handle.
 */
uintptr_t lc_kernel_dim(const struct LcCouplingKernel *kernel);

/**
 * Coalescence rate `μ_Ψ(ℝ^d)` at the pair `(x, y)`.
 *
 * # Safety
 * `x` and `y` must point to `dim` doubles, `out` must be writable.
 */
enum LcStatus lc_kernel_mu_mass(const struct LcCouplingKernel *kernel,
                                const double *x,
                                const double *y,
                                uintptr_t dim,
                                double *out);

/**
 * Log-log slope of the sampled `J(r)` over `radii`.
 *
 * # Safety
 * `radii` must point to `n` doubles, `out_slope` must be writable.
 */
enum LcStatus lc_kernel_j_exponent(const struct LcCouplingKernel *kernel,
                                   const double *radii,
                                   uintptr_t n,
                                   uintptr_t samples_per_radius,
                                   double *out_slope);

/**
 * Survival `P(T > t)` of the coupling time and `E|X_t − Y_t|` on `grid`
 * (increasing, inside `(0, horizon]`). Both outputs hold `n_grid` values.
 *
 * # Safety
 * `x0`/`y0` point to `dim` doubles, `grid`, `out_survival` and
 * `out_mean_dist` to `n_grid` doubles.
 */
enum LcStatus lc_coupling_survival(const struct LcCouplingKernel *kernel,
                                   const double *x0,
                                   const double *y0,
                                   uintptr_t dim,
                                   struct LcSimParams sim,
                                   const double *grid,
                                   uintptr_t n_grid,
                                   double *out_survival,
                                   double *out_mean_dist);

/**
 * Runs the experiment config at `path`; `out_passed` receives 1 when
 * every check passed, 0 otherwise.
 *
 * # Safety
 * `path` must be a NUL-terminated string, `out_passed` writable.
 */
enum LcStatus lc_run_config(const char *path, int32_t *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LEVYCOUPLING_H */
