//! C ABI over `levycoupling`.
//!
//! Objects are opaque heap handles released with their `_free` function.
//! Every fallible call returns an [`LcStatus`]; on failure the message is
//! kept per thread and read back with [`lc_last_error_message`]. Panics
//! are caught at the boundary and reported as `LC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use levycoupling::cli_harness::{self, ExperimentConfig};
use levycoupling::coefficient_field::{CoefficientField, Diffusion, Drift};
use levycoupling::coupling_kernel::CouplingKernel;
use levycoupling::error::Error;
use levycoupling::levy_model::{LevyModel, SupportVariant};
use levycoupling::linalg::{Vector, MAX_DIM};
use levycoupling::quadrature::QuadOptions;
use levycoupling::rate_analysis::estimate_j_k;
use levycoupling::sde_simulator::{coupling_time_ensemble, SimConfig};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Domain = 3,
    Quadrature = 4,
    Precondition = 5,
    Divergence = 6,
    CertificateUnavailable = 7,
    Config = 8,
    Io = 9,
    Other = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcSupport {
    FullSpace = 0,
    Ball = 1,
    HalfSlab = 2,
    Slab = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcDriftKind {
    Zero = 0,
    Linear = 1,
    SinPerturbed = 2,
    SignPerturbed = 3,
    HolderPerturbed = 4,
}

/// Drift preset; `beta` is read only by the Hölder preset.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LcDrift {
    pub kind: LcDriftKind,
    pub rate: f64,
    pub amp: f64,
    pub beta: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LcDiffusionKind {
    Constant = 0,
    DiagonalSin = 1,
    Rotation = 2,
}

/// Diffusion preset; `scale` is read by `Constant`, `base`/`amp` by the
/// others, `angle` by `Rotation`.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LcDiffusion {
    pub kind: LcDiffusionKind,
    pub scale: f64,
    pub base: f64,
    pub amp: f64,
    pub angle: f64,
}

/// Opaque Lévy measure.
pub struct LcLevyModel(LevyModel);

/// Opaque coupling kernel.
pub struct LcCouplingKernel(CouplingKernel);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> LcStatus {
    match e {
        Error::InvalidParameter(_) => LcStatus::InvalidParameter,
        Error::Domain(_) | Error::EmptySupport(_) | Error::UndefinedRatio(_) | Error::Structural(_) => LcStatus::Domain,
        Error::Quadrature { .. } => LcStatus::Quadrature,
        Error::Precondition(_) => LcStatus::Precondition,
        Error::Divergence { .. } => LcStatus::Divergence,
        Error::CertificateUnavailable(_) => LcStatus::CertificateUnavailable,
        Error::Config(_) => LcStatus::Config,
        Error::Io(_) => LcStatus::Io,
        Error::Fit(_) => LcStatus::Other,
    }
}

/// Runs `f`, mapping errors and panics to a status and the thread's
/// last-error message.
fn guard<F: FnOnce() -> Result<(), (LcStatus, String)>>(f: F) -> LcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LcStatus::Ok
        }
        Ok(Err((s, m))) => {
            set_error(m);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("panic: {msg}"));
            LcStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LcStatus, String) {
    (LcStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or point to `dim` readable doubles.
unsafe fn read_vec(p: *const f64, dim: usize, what: &str) -> Result<Vector, (LcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    if !(1..=MAX_DIM).contains(&dim) {
        return Err((LcStatus::InvalidParameter, format!("dim must lie in 1..={MAX_DIM}")));
    }
    Ok(Vector::from_slice(std::slice::from_raw_parts(p, dim)))
}

/// # Safety
/// `p` must be null or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (LcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (LcStatus::InvalidParameter, format!("{what} is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`) and returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn lc_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn lc_levy_model_new(
    dim: usize,
    alpha: f64,
    c0: f64,
    eta: f64,
    support: LcSupport,
    out: *mut *mut LcLevyModel,
) -> LcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let variant = match support {
            LcSupport::FullSpace => SupportVariant::FullSpace,
            LcSupport::Ball => SupportVariant::Ball,
            LcSupport::HalfSlab => SupportVariant::HalfSlab,
            LcSupport::Slab => SupportVariant::Slab,
        };
        let m = LevyModel::new(dim, alpha, c0, eta, variant).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcLevyModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `lc_levy_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lc_levy_model_free(model: *mut LcLevyModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Builds a kernel from a model (copied, so the model handle stays owned
/// by the caller), coefficient presets and the threshold κ.
///
/// # Safety
/// `model` must be a live model handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_kernel_new(
    model: *const LcLevyModel,
    drift: LcDrift,
    diffusion: LcDiffusion,
    kappa: f64,
    out: *mut *mut LcCouplingKernel,
) -> LcStatus {
    guard(|| {
        if model.is_null() {
            return Err(null("model"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let levy = (*model).0.clone();
        let b = match drift.kind {
            LcDriftKind::Zero => Drift::Zero,
            LcDriftKind::Linear => Drift::Linear { rate: drift.rate },
            LcDriftKind::SinPerturbed => Drift::SinPerturbed { rate: drift.rate, amp: drift.amp },
            LcDriftKind::SignPerturbed => Drift::SignPerturbed { rate: drift.rate, amp: drift.amp },
            LcDriftKind::HolderPerturbed => Drift::HolderPerturbed { rate: drift.rate, amp: drift.amp, beta: drift.beta },
        };
        let s = match diffusion.kind {
            LcDiffusionKind::Constant => Diffusion::Constant { scale: diffusion.scale },
            LcDiffusionKind::DiagonalSin => Diffusion::DiagonalSin { base: diffusion.base, amp: diffusion.amp },
            LcDiffusionKind::Rotation => Diffusion::Rotation { base: diffusion.base, amp: diffusion.amp, angle: diffusion.angle },
        };
        let cf = CoefficientField::new(levy.dim(), b, s).map_err(lib_err)?;
        let k = CouplingKernel::new(levy, cf, kappa).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcCouplingKernel(k)));
        Ok(())
    })
}

/// Builds the kernel described by the model, coefficient and coupling
/// sections of a TOML experiment config.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_kernel_from_config(toml: *const c_char, out: *mut *mut LcCouplingKernel) -> LcStatus {
    guard(|| {
        let text = read_str(toml, "toml")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = ExperimentConfig::parse(text).map_err(lib_err)?;
        let k = cfg.kernel().map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcCouplingKernel(k)));
        Ok(())
    })
}

/// # Safety
/// `kernel` must be null or a live kernel handle.
#[no_mangle]
pub unsafe extern "C" fn lc_kernel_free(kernel: *mut LcCouplingKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// # Safety
/// `kernel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lc_kernel_dim(kernel: *const LcCouplingKernel) -> usize {
    if kernel.is_null() {
        0
    } else {
        (*kernel).0.dim()
    }
}

/// Coalescence rate `μ_Ψ(ℝ^d)` at the pair `(x, y)`.
///
/// # Safety
/// `x` and `y` must point to `dim` doubles, `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_kernel_mu_mass(
    kernel: *const LcCouplingKernel,
    x: *const f64,
    y: *const f64,
    dim: usize,
    out: *mut f64,
) -> LcStatus {
    guard(|| {
        if kernel.is_null() {
            return Err(null("kernel"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let k = &(*kernel).0;
        if dim != k.dim() {
            return Err((LcStatus::InvalidParameter, format!("dim={dim} differs from the kernel's {}", k.dim())));
        }
        let (x, y) = (read_vec(x, dim, "x")?, read_vec(y, dim, "y")?);
        let pm = k.pair(&x, &y).map_err(lib_err)?;
        *out = pm.mu_mass(&QuadOptions::default()).map_err(lib_err)?.value;
        Ok(())
    })
}

/// Log-log slope of the sampled `J(r)` over `radii`.
///
/// # Safety
/// `radii` must point to `n` doubles, `out_slope` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lc_kernel_j_exponent(
    kernel: *const LcCouplingKernel,
    radii: *const f64,
    n: usize,
    samples_per_radius: usize,
    out_slope: *mut f64,
) -> LcStatus {
    guard(|| {
        if kernel.is_null() {
            return Err(null("kernel"));
        }
        if radii.is_null() {
            return Err(null("radii"));
        }
        if out_slope.is_null() {
            return Err(null("out_slope"));
        }
        let r = std::slice::from_raw_parts(radii, n);
        let c = estimate_j_k(&(*kernel).0, r, samples_per_radius, &QuadOptions::default().with_rel_tol(1e-8)).map_err(lib_err)?;
        *out_slope = c.exponent();
        Ok(())
    })
}

/// Simulation parameters for [`lc_coupling_survival`].
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LcSimParams {
    pub horizon: f64,
    pub dt_max: f64,
    pub trunc: f64,
    pub seed: u64,
    pub n_paths: usize,
}

/// Survival `P(T > t)` of the coupling time and `E|X_t − Y_t|` on `grid`
/// (increasing, inside `(0, horizon]`). Both outputs hold `n_grid` values.
///
/// # Safety
/// `x0`/`y0` point to `dim` doubles, `grid`, `out_survival` and
/// `out_mean_dist` to `n_grid` doubles.
#[no_mangle]
pub unsafe extern "C" fn lc_coupling_survival(
    kernel: *const LcCouplingKernel,
    x0: *const f64,
    y0: *const f64,
    dim: usize,
    sim: LcSimParams,
    grid: *const f64,
    n_grid: usize,
    out_survival: *mut f64,
    out_mean_dist: *mut f64,
) -> LcStatus {
    guard(|| {
        if kernel.is_null() {
            return Err(null("kernel"));
        }
        if grid.is_null() || out_survival.is_null() || out_mean_dist.is_null() {
            return Err(null("grid or output buffer"));
        }
        let k = &(*kernel).0;
        if dim != k.dim() {
            return Err((LcStatus::InvalidParameter, format!("dim={dim} differs from the kernel's {}", k.dim())));
        }
        let (x0, y0) = (read_vec(x0, dim, "x0")?, read_vec(y0, dim, "y0")?);
        let g = std::slice::from_raw_parts(grid, n_grid);
        if g.first().is_some_and(|&t| t <= 0.0) {
            return Err((LcStatus::InvalidParameter, "grid times must be positive".into()));
        }
        let cfg = SimConfig::new(sim.horizon, sim.dt_max, sim.trunc, sim.seed, sim.n_paths);
        let c = coupling_time_ensemble(k, &x0, &y0, &cfg, g).map_err(lib_err)?;
        // the curve starts with t = 0
        let s = std::slice::from_raw_parts_mut(out_survival, n_grid);
        let m = std::slice::from_raw_parts_mut(out_mean_dist, n_grid);
        s.copy_from_slice(&c.survival[1..]);
        m.copy_from_slice(&c.mean_dist[1..]);
        Ok(())
    })
}

/// Runs the experiment config at `path`; `out_passed` receives 1 when
/// every check passed, 0 otherwise.
///
/// # Safety
/// `path` must be a NUL-terminated string, `out_passed` writable.
#[no_mangle]
pub unsafe extern "C" fn lc_run_config(path: *const c_char, out_passed: *mut i32) -> LcStatus {
    guard(|| {
        let p = read_str(path, "path")?;
        if out_passed.is_null() {
            return Err(null("out_passed"));
        }
        let cfg = ExperimentConfig::load(Path::new(p)).map_err(lib_err)?;
        let outcome = cli_harness::run(&cfg).map_err(lib_err)?;
        *out_passed = i32::from(outcome.passed());
        Ok(())
    })
}
