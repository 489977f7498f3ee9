//! Test functions with analytic derivatives: smooth functions on ℝ^d,
//! functions of a pair (x, y), and radial profiles f(|x−y|).

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::linalg::{Matrix, Vector};

pub trait SmoothFn: Send + Sync {
    fn value(&self, x: &Vector) -> f64;
    fn gradient(&self, x: &Vector) -> Vector;
    fn hessian(&self, x: &Vector) -> Matrix;
    fn name(&self) -> String;
}

pub type SharedFn = Arc<dyn SmoothFn>;

#[derive(Clone, Debug)]
pub struct Constant(pub f64);

impl SmoothFn for Constant {
    fn value(&self, _: &Vector) -> f64 {
        self.0
    }
    fn gradient(&self, x: &Vector) -> Vector {
        Vector::zeros(x.dim())
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::zeros(x.dim())
    }
    fn name(&self) -> String {
        format!("const({})", self.0)
    }
}

/// `⟨c, x⟩`.
#[derive(Clone, Debug)]
pub struct Linear(pub Vector);

impl SmoothFn for Linear {
    fn value(&self, x: &Vector) -> f64 {
        self.0.dot(x)
    }
    fn gradient(&self, _: &Vector) -> Vector {
        self.0
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::zeros(x.dim())
    }
    fn name(&self) -> String {
        "linear".into()
    }
}

/// `|x|²`.
#[derive(Clone, Debug)]
pub struct SquaredNorm;

impl SmoothFn for SquaredNorm {
    fn value(&self, x: &Vector) -> f64 {
        x.norm_sq()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        x.scale(2.0)
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        Matrix::scalar(x.dim(), 2.0)
    }
    fn name(&self) -> String {
        "sq_norm".into()
    }
}

/// `height·exp(−|x−center|²/(2w²))`.
#[derive(Clone, Debug)]
pub struct GaussianBump {
    pub center: Vector,
    pub width: f64,
    pub height: f64,
}

impl SmoothFn for GaussianBump {
    fn value(&self, x: &Vector) -> f64 {
        let u = *x - self.center;
        self.height * (-u.norm_sq() / (2.0 * self.width * self.width)).exp()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        let u = *x - self.center;
        u.scale(-self.value(x) / (self.width * self.width))
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        let u = *x - self.center;
        let w2 = self.width * self.width;
        let v = self.value(x);
        let d = x.dim();
        let mut h = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                h.set(i, j, v * (u[i] * u[j] / (w2 * w2) - delta / w2));
            }
        }
        h
    }
    fn name(&self) -> String {
        format!("gauss(w={})", self.width)
    }
}

/// `amp·cos(⟨k, x⟩ + phase)`.
#[derive(Clone, Debug)]
pub struct CosWave {
    pub k: Vector,
    pub phase: f64,
    pub amp: f64,
}

impl SmoothFn for CosWave {
    fn value(&self, x: &Vector) -> f64 {
        self.amp * (self.k.dot(x) + self.phase).cos()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.k.scale(-self.amp * (self.k.dot(x) + self.phase).sin())
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        let c = -self.amp * (self.k.dot(x) + self.phase).cos();
        let d = x.dim();
        let mut h = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                h.set(i, j, c * self.k[i] * self.k[j]);
            }
        }
        h
    }
    fn name(&self) -> String {
        "cos".into()
    }
}

/// `√(1+|x|²)`, a smoothed `|x|`.
#[derive(Clone, Debug)]
pub struct SmoothNorm;

impl SmoothFn for SmoothNorm {
    fn value(&self, x: &Vector) -> f64 {
        (1.0 + x.norm_sq()).sqrt()
    }
    fn gradient(&self, x: &Vector) -> Vector {
        x.scale(1.0 / self.value(x))
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        let s = self.value(x);
        let d = x.dim();
        let mut h = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                h.set(i, j, delta / s - x[i] * x[j] / (s * s * s));
            }
        }
        h
    }
    fn name(&self) -> String {
        "smooth_norm".into()
    }
}

/// `factor·f`.
#[derive(Clone)]
pub struct Scaled(pub SharedFn, pub f64);

impl SmoothFn for Scaled {
    fn value(&self, x: &Vector) -> f64 {
        self.1 * self.0.value(x)
    }
    fn gradient(&self, x: &Vector) -> Vector {
        self.0.gradient(x).scale(self.1)
    }
    fn hessian(&self, x: &Vector) -> Matrix {
        self.0.hessian(x).scale(self.1)
    }
    fn name(&self) -> String {
        format!("{}*{}", self.1, self.0.name())
    }
}

/// A function `h(x, y)` on ℝ^{2d} with analytic first and second
/// derivatives.
pub trait PairFn: Send + Sync {
    fn value(&self, x: &Vector, y: &Vector) -> f64;
    /// `(∇ₓh, ∇ᵧh)`.
    fn gradients(&self, x: &Vector, y: &Vector) -> (Vector, Vector);
    /// `(∇ₓₓh, ∇ₓᵧh, ∇ᵧᵧh)`.
    fn hessian_blocks(&self, x: &Vector, y: &Vector) -> (Matrix, Matrix, Matrix);
}

/// `h(x, y) = f(x) + g(y)`; a missing side is zero.
#[derive(Clone)]
pub struct Separable {
    pub f: Option<SharedFn>,
    pub g: Option<SharedFn>,
}

impl Separable {
    pub fn sum(f: SharedFn, g: SharedFn) -> Self {
        Separable { f: Some(f), g: Some(g) }
    }
    pub fn on_x(f: SharedFn) -> Self {
        Separable { f: Some(f), g: None }
    }
    pub fn on_y(g: SharedFn) -> Self {
        Separable { f: None, g: Some(g) }
    }
}

impl PairFn for Separable {
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.f.as_ref().map_or(0.0, |f| f.value(x)) + self.g.as_ref().map_or(0.0, |g| g.value(y))
    }
    fn gradients(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        (
            self.f.as_ref().map_or(Vector::zeros(x.dim()), |f| f.gradient(x)),
            self.g.as_ref().map_or(Vector::zeros(y.dim()), |g| g.gradient(y)),
        )
    }
    fn hessian_blocks(&self, x: &Vector, y: &Vector) -> (Matrix, Matrix, Matrix) {
        let d = x.dim();
        (
            self.f.as_ref().map_or(Matrix::zeros(d), |f| f.hessian(x)),
            Matrix::zeros(d),
            self.g.as_ref().map_or(Matrix::zeros(d), |g| g.hessian(y)),
        )
    }
}

/// `h(x, y) = F(|x−y|)` for a radial profile smooth at 0 (F′(0)=0).
#[derive(Clone)]
pub struct OfDistance(pub Arc<dyn RadialFn>);

impl PairFn for OfDistance {
    fn value(&self, x: &Vector, y: &Vector) -> f64 {
        self.0.value((*x - *y).norm())
    }
    fn gradients(&self, x: &Vector, y: &Vector) -> (Vector, Vector) {
        let u = *x - *y;
        let r = u.norm();
        if r == 0.0 {
            return (Vector::zeros(x.dim()), Vector::zeros(x.dim()));
        }
        let g = u.scale(self.0.d1(r) / r);
        (g, -g)
    }
    fn hessian_blocks(&self, x: &Vector, y: &Vector) -> (Matrix, Matrix, Matrix) {
        let u = *x - *y;
        let r = u.norm();
        let d = x.dim();
        let mut h = Matrix::zeros(d);
        if r == 0.0 {
            // F″(0)·I for a profile that is smooth through the origin.
            h = Matrix::scalar(d, self.0.d2(0.0));
        } else {
            let f1 = self.0.d1(r) / r;
            let f2 = self.0.d2(r);
            for i in 0..d {
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    let uu = u[i] * u[j] / (r * r);
                    h.set(i, j, f2 * uu + f1 * (delta - uu));
                }
            }
        }
        (h, h.scale(-1.0), h)
    }
}

/// A profile `f: [0,∞) → ℝ` with analytic first and second derivatives.
pub trait RadialFn: Send + Sync {
    fn value(&self, r: f64) -> f64;
    fn d1(&self, r: f64) -> f64;
    fn d2(&self, r: f64) -> f64;
    /// `sup f`, if finite.
    fn sup(&self) -> Option<f64>;
    fn name(&self) -> String;
}

/// Check `f(0)=0`, `f′ ≥ 0`, `f″ ≤ 0` on a grid of positive radii.
pub fn check_concave(f: &dyn RadialFn, radii: &[f64]) -> Result<()> {
    if f.value(0.0).abs() > 1e-14 {
        return Err(Error::Precondition(format!("{}: f(0) = {} is not 0", f.name(), f.value(0.0))));
    }
    for &r in radii {
        if f.d1(r) < 0.0 {
            return Err(Error::Precondition(format!("{}: f'({r}) < 0", f.name())));
        }
        if f.d2(r) > 1e-14 * (1.0 + f.d1(r) / r) {
            return Err(Error::Precondition(format!("{}: f''({r}) > 0", f.name())));
        }
    }
    Ok(())
}

/// `f(r) = r`.
#[derive(Clone, Copy, Debug)]
pub struct Identity;

impl RadialFn for Identity {
    fn value(&self, r: f64) -> f64 {
        r
    }
    fn d1(&self, _: f64) -> f64 {
        1.0
    }
    fn d2(&self, _: f64) -> f64 {
        0.0
    }
    fn sup(&self) -> Option<f64> {
        None
    }
    fn name(&self) -> String {
        "r".into()
    }
}

/// `r^θ` on `[0, a]`, continued by a bounded exponential cap
/// `a^θ + s·c·(1 − e^{−(r−a)/c})` with `s = θa^{θ−1}`.
///
/// For θ < 1 the choice `c = a/(1−θ)` matches f″ at `a` too, so the profile
/// is C²; for θ = 1 it is C¹ and still concave.
#[derive(Clone, Copy, Debug)]
pub struct PowerCapped {
    theta: f64,
    a: f64,
    c: f64,
    slope: f64,
}

impl PowerCapped {
    pub fn new(theta: f64, a: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(invalid("power profile theta must lie in (0,1]"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("power profile cap radius must be positive"));
        }
        let c = if theta < 1.0 { a / (1.0 - theta) } else { a };
        Ok(PowerCapped { theta, a, c, slope: theta * a.powf(theta - 1.0) })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn cap(&self) -> f64 {
        self.a
    }
}

impl RadialFn for PowerCapped {
    fn value(&self, r: f64) -> f64 {
        if r <= self.a {
            r.powf(self.theta)
        } else {
            self.a.powf(self.theta) + self.slope * self.c * (1.0 - (-(r - self.a) / self.c).exp())
        }
    }
    fn d1(&self, r: f64) -> f64 {
        if r <= self.a {
            self.theta * r.powf(self.theta - 1.0)
        } else {
            self.slope * (-(r - self.a) / self.c).exp()
        }
    }
    fn d2(&self, r: f64) -> f64 {
        if r <= self.a {
            self.theta * (self.theta - 1.0) * r.powf(self.theta - 2.0)
        } else {
            -self.slope / self.c * (-(r - self.a) / self.c).exp()
        }
    }
    fn sup(&self) -> Option<f64> {
        Some(self.a.powf(self.theta) + self.slope * self.c)
    }
    fn name(&self) -> String {
        format!("pow(theta={},cap={})", self.theta, self.a)
    }
}

/// `ψ(r) = r(1 − L^{−θ})`, `L = ln(1/r)`, for `r ≤ r_c`, continued linearly.
#[derive(Clone, Copy, Debug)]
pub struct LogCorrected {
    theta: f64,
    rc: f64,
    value_rc: f64,
    slope_rc: f64,
}

impl LogCorrected {
    pub fn new(theta: f64, rc: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid("log-corrected theta must be positive"));
        }
        if !(rc > 0.0 && rc < 1.0) {
            return Err(invalid("log-corrected cutoff must lie in (0,1)"));
        }
        let mut f = LogCorrected { theta, rc, value_rc: 0.0, slope_rc: 0.0 };
        f.value_rc = f.inner(rc).0;
        f.slope_rc = f.inner(rc).1;
        if !(f.slope_rc > 0.0) {
            return Err(invalid(format!("log-corrected profile is not increasing at cutoff {rc}")));
        }
        Ok(f)
    }

    /// The largest cutoff at which ψ′ stays above `frac`, on a coarse scan.
    pub fn with_default_cutoff(theta: f64) -> Result<Self> {
        let mut rc = 0.25;
        while rc > 1e-12 {
            if let Ok(f) = LogCorrected::new(theta, rc) {
                if f.slope_rc > 0.25 {
                    return Ok(f);
                }
            }
            rc *= 0.5;
        }
        Err(invalid("no usable cutoff for the log-corrected profile"))
    }

    pub fn cutoff(&self) -> f64 {
        self.rc
    }

    fn inner(&self, r: f64) -> (f64, f64, f64) {
        let th = self.theta;
        let l = (1.0 / r).ln();
        let lt = l.powf(-th);
        let v = r * (1.0 - lt);
        let d1 = 1.0 - lt - th * lt / l;
        let d2 = -(th / r) * lt / l * (1.0 + (th + 1.0) / l);
        (v, d1, d2)
    }
}

impl RadialFn for LogCorrected {
    fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            0.0
        } else if r <= self.rc {
            self.inner(r).0
        } else {
            self.value_rc + self.slope_rc * (r - self.rc)
        }
    }
    fn d1(&self, r: f64) -> f64 {
        if r <= 0.0 {
            1.0
        } else if r <= self.rc {
            self.inner(r).1
        } else {
            self.slope_rc
        }
    }
    fn d2(&self, r: f64) -> f64 {
        if r > 0.0 && r <= self.rc {
            self.inner(r).2
        } else {
            0.0
        }
    }
    fn sup(&self) -> Option<f64> {
        None
    }
    fn name(&self) -> String {
        format!("logcorr(theta={},rc={:.4})", self.theta, self.rc)
    }
}

/// `1 − exp(−r²/(2w²))`: smooth through the origin, used to compare the
/// radial and pair forms of the coupling generator.
#[derive(Clone, Copy, Debug)]
pub struct GaussianProfile {
    pub width: f64,
}

impl RadialFn for GaussianProfile {
    fn value(&self, r: f64) -> f64 {
        1.0 - (-r * r / (2.0 * self.width * self.width)).exp()
    }
    fn d1(&self, r: f64) -> f64 {
        let w2 = self.width * self.width;
        r / w2 * (-r * r / (2.0 * w2)).exp()
    }
    fn d2(&self, r: f64) -> f64 {
        let w2 = self.width * self.width;
        (1.0 / w2 - r * r / (w2 * w2)) * (-r * r / (2.0 * w2)).exp()
    }
    fn sup(&self) -> Option<f64> {
        Some(1.0)
    }
    fn name(&self) -> String {
        format!("gauss_profile(w={})", self.width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid;

    fn fd_check_radial(f: &dyn RadialFn, rs: &[f64]) {
        for &r in rs {
            let h = 1e-5 * r;
            let d1 = (f.value(r + h) - f.value(r - h)) / (2.0 * h);
            let d2 = (f.d1(r + h) - f.d1(r - h)) / (2.0 * h);
            assert!((d1 - f.d1(r)).abs() <= 1e-6 * (1.0 + f.d1(r).abs()), "{} d1 at {r}", f.name());
            assert!((d2 - f.d2(r)).abs() <= 1e-5 * (1.0 + f.d2(r).abs()), "{} d2 at {r}", f.name());
        }
    }

    #[test]
    fn radial_derivatives_match_differences() {
        let rs = [0.003, 0.05, 0.4, 1.3, 2.5, 7.0];
        fd_check_radial(&PowerCapped::new(0.5, 2.0).unwrap(), &rs);
        fd_check_radial(&PowerCapped::new(1.0, 2.0).unwrap(), &[0.003, 0.05, 0.4, 1.3, 2.5, 7.0]);
        fd_check_radial(&GaussianProfile { width: 0.7 }, &rs);
        let lc = LogCorrected::with_default_cutoff(1.0).unwrap();
        fd_check_radial(&lc, &[1e-6, 1e-3, 0.3 * lc.cutoff(), 3.0]);
    }

    #[test]
    fn power_cap_is_c2_for_fractional_theta() {
        let f = PowerCapped::new(0.5, 2.0).unwrap();
        let (lo, hi) = (2.0 - 1e-12, 2.0 + 1e-12);
        assert!((f.value(lo) - f.value(hi)).abs() < 1e-10);
        assert!((f.d1(lo) - f.d1(hi)).abs() < 1e-10);
        assert!((f.d2(lo) - f.d2(hi)).abs() < 1e-10);
        assert!((f.sup().unwrap() - f.value(1e6)).abs() < 1e-9);
    }

    #[test]
    fn concavity_checks() {
        let rs = grid::log_space(1e-6, 50.0, 400);
        check_concave(&PowerCapped::new(0.25, 1.0).unwrap(), &rs).unwrap();
        check_concave(&LogCorrected::with_default_cutoff(0.5).unwrap(), &rs).unwrap();
        check_concave(&Identity, &rs).unwrap();
        assert!(check_concave(&GaussianProfile { width: 1.0 }, &rs).is_err());
    }

    fn fd_check_smooth(f: &dyn SmoothFn, x: Vector) {
        let d = x.dim();
        let h = 1e-5;
        for i in 0..d {
            let e = Vector::axis(d, i).scale(h);
            let gi = (f.value(&(x + e)) - f.value(&(x - e))) / (2.0 * h);
            assert!((gi - f.gradient(&x)[i]).abs() < 1e-7, "{} grad", f.name());
            let col = (f.gradient(&(x + e)) - f.gradient(&(x - e))).scale(1.0 / (2.0 * h));
            for j in 0..d {
                assert!((col[j] - f.hessian(&x).get(j, i)).abs() < 1e-6, "{} hess", f.name());
            }
        }
    }

    #[test]
    fn smooth_derivatives_match_differences() {
        let x = Vector::from_slice(&[0.3, -0.7]);
        fd_check_smooth(&GaussianBump { center: Vector::from_slice(&[0.1, 0.2]), width: 0.8, height: 1.5 }, x);
        fd_check_smooth(&CosWave { k: Vector::from_slice(&[1.0, -2.0]), phase: 0.3, amp: 0.5 }, x);
        fd_check_smooth(&SmoothNorm, x);
        fd_check_smooth(&SquaredNorm, x);
        fd_check_smooth(&Scaled(Arc::new(SmoothNorm), 2.0), x);
    }

    #[test]
    fn distance_pair_hessian_consistent() {
        let h = OfDistance(Arc::new(GaussianProfile { width: 0.9 }));
        let x = Vector::from_slice(&[0.4, 0.1]);
        let y = Vector::from_slice(&[-0.2, 0.5]);
        let (gx, gy) = h.gradients(&x, &y);
        let eps = 1e-6;
        for i in 0..2 {
            let e = Vector::axis(2, i).scale(eps);
            let fx = (h.value(&(x + e), &y) - h.value(&(x - e), &y)) / (2.0 * eps);
            let fy = (h.value(&x, &(y + e)) - h.value(&x, &(y - e))) / (2.0 * eps);
            assert!((fx - gx[i]).abs() < 1e-8 && (fy - gy[i]).abs() < 1e-8);
            let (hxx, hxy, _) = h.hessian_blocks(&x, &y);
            let dxx = (h.gradients(&(x + e), &y).0 - h.gradients(&(x - e), &y).0).scale(0.5 / eps);
            let dxy = (h.gradients(&x, &(y + e)).0 - h.gradients(&x, &(y - e)).0).scale(0.5 / eps);
            for j in 0..2 {
                assert!((dxx[j] - hxx.get(j, i)).abs() < 1e-6);
                assert!((dxy[j] - hxy.get(j, i)).abs() < 1e-6);
            }
        }
    }
}
