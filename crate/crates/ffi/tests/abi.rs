use levycoupling::coefficient_field::{CoefficientField, Diffusion, Drift};
use levycoupling::coupling_kernel::CouplingKernel;
use levycoupling::levy_model::{LevyModel, SupportVariant};
use levycoupling::linalg::Vector;
use levycoupling::quadrature::QuadOptions;
use levycoupling_ffi::*;
use std::ffi::{CStr, CString};
use std::ptr;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe {
        lc_last_error_message(buf.as_mut_ptr(), buf.len());
        CStr::from_ptr(buf.as_ptr()).to_string_lossy().into_owned()
    }
}

fn sin_drift() -> LcDrift {
    LcDrift { kind: LcDriftKind::SinPerturbed, rate: 1.0, amp: 1.0, beta: 0.0 }
}

fn unit_diffusion() -> LcDiffusion {
    LcDiffusion { kind: LcDiffusionKind::Constant, scale: 1.0, base: 0.0, amp: 0.0, angle: 0.0 }
}

/// 1-d additive kernel, α = 0.5 on the unit ball.
fn additive_kernel() -> *mut LcCouplingKernel {
    let mut model = ptr::null_mut();
    let mut kernel = ptr::null_mut();
    unsafe {
        assert_eq!(lc_levy_model_new(1, 0.5, 1.0, 1.0, LcSupport::Ball, &mut model), LcStatus::Ok);
        assert_eq!(lc_kernel_new(model, sin_drift(), unit_diffusion(), 1.0, &mut kernel), LcStatus::Ok);
        // the kernel owns a copy, so the model can go first
        lc_levy_model_free(model);
    }
    kernel
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(lc_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn mu_mass_matches_rust_api() {
    let kernel = additive_kernel();
    assert_eq!(unsafe { lc_kernel_dim(kernel) }, 1);
    let (x, y) = ([0.3], [-0.2]);
    let mut mass = f64::NAN;
    let status = unsafe { lc_kernel_mu_mass(kernel, x.as_ptr(), y.as_ptr(), 1, &mut mass) };
    assert_eq!(status, LcStatus::Ok, "{}", last_error());
    assert_eq!(last_error(), "");

    let levy = LevyModel::new(1, 0.5, 1.0, 1.0, SupportVariant::Ball).unwrap();
    let cf = CoefficientField::new(1, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, Diffusion::Constant { scale: 1.0 }).unwrap();
    let k = CouplingKernel::new(levy, cf, 1.0).unwrap();
    let pm = k.pair(&Vector::from_slice(&x), &Vector::from_slice(&y)).unwrap();
    let want = pm.mu_mass(&QuadOptions::default()).unwrap().value;
    assert_eq!(mass, want);
    assert!(mass > 0.0);
    unsafe { lc_kernel_free(kernel) };
}

#[test]
fn null_pointers_are_reported() {
    let kernel = additive_kernel();
    let x = [0.3];
    let mut out = 0.0;
    unsafe {
        assert_eq!(lc_kernel_mu_mass(ptr::null(), x.as_ptr(), x.as_ptr(), 1, &mut out), LcStatus::NullPointer);
        assert!(last_error().contains("kernel"));
        assert_eq!(lc_kernel_mu_mass(kernel, ptr::null(), x.as_ptr(), 1, &mut out), LcStatus::NullPointer);
        assert_eq!(lc_kernel_mu_mass(kernel, x.as_ptr(), x.as_ptr(), 1, ptr::null_mut()), LcStatus::NullPointer);
        assert_eq!(lc_levy_model_new(1, 0.5, 1.0, 1.0, LcSupport::Ball, ptr::null_mut()), LcStatus::NullPointer);
        assert_eq!(lc_kernel_dim(ptr::null()), 0);
        // freeing null is a no-op
        lc_kernel_free(ptr::null_mut());
        lc_levy_model_free(ptr::null_mut());
        lc_kernel_free(kernel);
    }
}

#[test]
fn invalid_inputs_map_to_status_codes() {
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(lc_levy_model_new(1, 2.5, 1.0, 1.0, LcSupport::Ball, &mut model), LcStatus::InvalidParameter);
        assert!(model.is_null());
        assert!(last_error().contains("alpha"), "{}", last_error());
    }

    let kernel = additive_kernel();
    let (x, y) = ([0.3, 0.0], [0.1, 0.0]);
    let mut out = 0.0;
    unsafe {
        assert_eq!(lc_kernel_mu_mass(kernel, x.as_ptr(), y.as_ptr(), 2, &mut out), LcStatus::InvalidParameter);
        assert!(last_error().contains("dim=2"));
        // x == y has no coupling measure to integrate
        assert_eq!(lc_kernel_mu_mass(kernel, x.as_ptr(), x.as_ptr(), 1, &mut out), LcStatus::Precondition);
        lc_kernel_free(kernel);
    }
}

#[test]
fn error_message_is_truncated_and_terminated() {
    let mut model = ptr::null_mut();
    unsafe {
        lc_levy_model_new(1, -1.0, 1.0, 1.0, LcSupport::Ball, &mut model);
        let full = lc_last_error_message(ptr::null_mut(), 0);
        assert!(full > 8);
        let mut buf = [1 as std::ffi::c_char; 8];
        let n = lc_last_error_message(buf.as_mut_ptr(), buf.len());
        assert_eq!(n, full);
        assert_eq!(buf[7], 0);
        assert_eq!(CStr::from_ptr(buf.as_ptr()).to_bytes().len(), 7);
    }
}

#[test]
fn kernel_from_config() {
    let good = CString::new("scenario = \"marginality\"\n[model]\ndim = 2\nalpha = 1.2\n[coupling]\nkappa = 0.5\n").unwrap();
    let mut kernel = ptr::null_mut();
    unsafe {
        assert_eq!(lc_kernel_from_config(good.as_ptr(), &mut kernel), LcStatus::Ok, "{}", last_error());
        assert_eq!(lc_kernel_dim(kernel), 2);
        lc_kernel_free(kernel);
    }

    let bad = CString::new("scenario = \"marginality\"\n[model]\nalpha = 2.5\n").unwrap();
    let mut kernel = ptr::null_mut();
    unsafe {
        assert_eq!(lc_kernel_from_config(bad.as_ptr(), &mut kernel), LcStatus::InvalidParameter);
        assert!(kernel.is_null());
        assert!(last_error().contains("alpha must lie in (0,2)"), "{}", last_error());
    }

    let unknown = CString::new("scenario = \"marginality\"\nsed = 3\n").unwrap();
    unsafe {
        assert_eq!(lc_kernel_from_config(unknown.as_ptr(), &mut kernel), LcStatus::Config);
    }
}

#[test]
fn survival_curve_is_monotone() {
    let kernel = additive_kernel();
    let (x, y) = ([-1.0], [1.0]);
    let sim = LcSimParams { horizon: 2.0, dt_max: 0.01, trunc: 1e-2, seed: 7, n_paths: 1000 };
    let grid = [0.5, 1.0, 1.5, 2.0];
    let mut surv = [f64::NAN; 4];
    let mut dist = [f64::NAN; 4];
    unsafe {
        let s = lc_coupling_survival(kernel, x.as_ptr(), y.as_ptr(), 1, sim, grid.as_ptr(), 4, surv.as_mut_ptr(), dist.as_mut_ptr());
        assert_eq!(s, LcStatus::Ok, "{}", last_error());
    }
    assert!(surv.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(surv.windows(2).all(|w| w[1] <= w[0]));
    assert!(surv[3] < 1.0);
    assert!(dist.iter().all(|d| d.is_finite() && *d >= 0.0));

    // same seed, same numbers
    let mut surv2 = [0.0; 4];
    let mut dist2 = [0.0; 4];
    unsafe {
        lc_coupling_survival(kernel, x.as_ptr(), y.as_ptr(), 1, sim, grid.as_ptr(), 4, surv2.as_mut_ptr(), dist2.as_mut_ptr());
    }
    assert_eq!(surv, surv2);
    assert_eq!(dist, dist2);

    let zero = [0.0, 1.0];
    unsafe {
        let s = lc_coupling_survival(kernel, x.as_ptr(), y.as_ptr(), 1, sim, zero.as_ptr(), 2, surv.as_mut_ptr(), dist.as_mut_ptr());
        assert_eq!(s, LcStatus::InvalidParameter);
        lc_kernel_free(kernel);
    }
}

#[test]
fn run_config_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = format!(
        "scenario = \"j_exponent\"\n[model]\ndim = 1\nalpha = 0.5\n[params]\nradii = [0.1, 0.05, 0.025]\nsamples_per_radius = 1\n[output]\ndir = {:?}\n",
        out.to_str().unwrap()
    );
    let path = dir.path().join("cfg.toml");
    std::fs::write(&path, cfg).unwrap();
    let p = CString::new(path.to_str().unwrap()).unwrap();
    let mut passed = -1;
    unsafe {
        assert_eq!(lc_run_config(p.as_ptr(), &mut passed), LcStatus::Ok, "{}", last_error());
    }
    assert_eq!(passed, 1);
    assert!(out.join("manifest.toml").exists());

    let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
    unsafe {
        assert_eq!(lc_run_config(missing.as_ptr(), &mut passed), LcStatus::Io);
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/levycoupling.h")).unwrap();
    for name in [
        "lc_version",
        "lc_last_error_message",
        "lc_levy_model_new",
        "lc_kernel_new",
        "lc_kernel_from_config",
        "lc_kernel_mu_mass",
        "lc_kernel_j_exponent",
        "lc_coupling_survival",
        "lc_run_config",
        "LC_STATUS_NULL_POINTER",
        "typedef struct LcCouplingKernel LcCouplingKernel",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
