//! Drift and diffusion coefficients, their structural constants, and the
//! sampled checks of non-degeneracy, Lipschitz continuity and
//! dissipativity.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid;
use crate::linalg::{Matrix, Vector};

pub type VectorField = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    /// `b(x) = −rate·x`.
    Linear {
        rate: f64,
    },
    /// `b(x) = −rate·x + amp·sin(x)` componentwise.
    SinPerturbed {
        rate: f64,
        amp: f64,
    },
    /// `b(x) = −rate·x + amp·sign(x)` componentwise; bounded, not continuous.
    SignPerturbed {
        rate: f64,
        amp: f64,
    },
    /// `b(x) = −rate·x + amp·sign(x)|x|^β` componentwise; locally β-Hölder.
    HolderPerturbed {
        rate: f64,
        amp: f64,
        beta: f64,
    },
    #[serde(skip)]
    Custom(VectorField),
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "Zero"),
            Drift::Linear { rate } => write!(f, "Linear {{ rate: {rate} }}"),
            Drift::SinPerturbed { rate, amp } => write!(f, "SinPerturbed {{ rate: {rate}, amp: {amp} }}"),
            Drift::SignPerturbed { rate, amp } => write!(f, "SignPerturbed {{ rate: {rate}, amp: {amp} }}"),
            Drift::HolderPerturbed { rate, amp, beta } => {
                write!(f, "HolderPerturbed {{ rate: {rate}, amp: {amp}, beta: {beta} }}")
            }
            Drift::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Drift {
    pub fn eval(&self, x: &Vector) -> Vector {
        let mut out = Vector::zeros(x.dim());
        match self {
            Drift::Zero => {}
            Drift::Linear { rate } => out = x.scale(-rate),
            Drift::SinPerturbed { rate, amp } => {
                for i in 0..x.dim() {
                    out[i] = -rate * x[i] + amp * x[i].sin();
                }
            }
            Drift::SignPerturbed { rate, amp } => {
                for i in 0..x.dim() {
                    let s = if x[i] > 0.0 {
                        1.0
                    } else if x[i] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    out[i] = -rate * x[i] + amp * s;
                }
            }
            Drift::HolderPerturbed { rate, amp, beta } => {
                for i in 0..x.dim() {
                    out[i] = -rate * x[i] + amp * x[i].signum() * x[i].abs().powf(*beta);
                    if x[i] == 0.0 {
                        out[i] = 0.0;
                    }
                }
            }
            Drift::Custom(f) => out = f(x),
        }
        out
    }

    /// A dissipativity profile that the preset satisfies for every pair.
    pub fn default_profile(&self, dim: usize) -> Option<DissipativityProfile> {
        let sd = (dim as f64).sqrt();
        match *self {
            Drift::Linear { rate } if rate > 0.0 => Some(DissipativityProfile { k1: 0.0, k2: rate, l0: 0.0, beta: 1.0 }),
            Drift::SinPerturbed { rate, amp } if rate > 0.0 => {
                Some(DissipativityProfile { k1: amp.abs() + rate, k2: rate / 2.0, l0: 4.0 * amp.abs() * sd / rate, beta: 1.0 })
            }
            Drift::SignPerturbed { rate, amp } if rate > 0.0 => {
                Some(DissipativityProfile { k1: 2.0 * amp.abs() * sd, k2: rate / 2.0, l0: 4.0 * amp.abs() * sd / rate, beta: 0.0 })
            }
            Drift::HolderPerturbed { rate, amp, beta } if rate > 0.0 && beta < 1.0 => {
                let k1 = amp.abs() * 2f64.powf(1.0 - beta) * (dim as f64).powf((1.0 - beta) / 2.0);
                Some(DissipativityProfile { k1, k2: rate / 2.0, l0: (2.0 * k1 / rate).powf(1.0 / (1.0 - beta)), beta })
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            Drift::Linear { rate } if !finite(&[rate]) => Err(invalid("drift rate must be finite")),
            Drift::SinPerturbed { rate, amp } | Drift::SignPerturbed { rate, amp } if !finite(&[rate, amp]) => {
                Err(invalid("drift parameters must be finite"))
            }
            Drift::HolderPerturbed { beta, .. } if !(beta > 0.0 && beta <= 1.0) => Err(invalid("holder drift beta must lie in (0,1]")),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum Diffusion {
    /// `σ ≡ scale·I`: the additive-noise case.
    Constant { scale: f64 },
    /// `σ(x) = diag(base + amp·sin xᵢ)`.
    DiagonalSin { base: f64, amp: f64 },
    /// `σ(x) = R(angle·sin x₁)·diag(base + amp·sin xᵢ)`, R rotating the
    /// first two axes.
    Rotation { base: f64, amp: f64, angle: f64 },
    #[serde(skip)]
    Custom { sigma: MatrixField, diagonal: bool },
}

impl fmt::Debug for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Constant { scale } => write!(f, "Constant {{ scale: {scale} }}"),
            Diffusion::DiagonalSin { base, amp } => write!(f, "DiagonalSin {{ base: {base}, amp: {amp} }}"),
            Diffusion::Rotation { base, amp, angle } => {
                write!(f, "Rotation {{ base: {base}, amp: {amp}, angle: {angle} }}")
            }
            Diffusion::Custom { diagonal, .. } => write!(f, "Custom {{ diagonal: {diagonal} }}"),
        }
    }
}

impl Diffusion {
    pub fn eval(&self, x: &Vector) -> Matrix {
        let d = x.dim();
        match self {
            Diffusion::Constant { scale } => Matrix::scalar(d, *scale),
            Diffusion::DiagonalSin { base, amp } => Matrix::diagonal(&diag_sin(x, *base, *amp)),
            Diffusion::Rotation { base, amp, angle } => {
                let diag = Matrix::diagonal(&diag_sin(x, *base, *amp));
                if d == 1 {
                    return diag;
                }
                let (s, c) = (angle * x[0].sin()).sin_cos();
                let mut rot = Matrix::identity(d);
                rot.set(0, 0, c);
                rot.set(0, 1, -s);
                rot.set(1, 0, s);
                rot.set(1, 1, c);
                rot.mul_mat(&diag)
            }
            Diffusion::Custom { sigma, .. } => sigma(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Diffusion::Constant { .. })
    }

    pub fn is_diagonal(&self, dim: usize) -> bool {
        match self {
            Diffusion::Constant { .. } | Diffusion::DiagonalSin { .. } => true,
            Diffusion::Rotation { .. } => dim == 1,
            Diffusion::Custom { diagonal, .. } => *diagonal,
        }
    }

    /// `(Λ, L_σ, Λ_HS)`: operator-norm non-degeneracy, Hilbert–Schmidt
    /// Lipschitz constant, and a bound on ‖σ‖_HS ∨ ‖σ⁻¹‖_HS.
    fn constants(&self, dim: usize) -> Result<(f64, f64, f64)> {
        let sd = (dim as f64).sqrt();
        match *self {
            Diffusion::Constant { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(invalid("constant diffusion scale must be positive"));
                }
                Ok((scale.max(1.0 / scale), 0.0, (scale * sd).max(sd / scale)))
            }
            Diffusion::DiagonalSin { base, amp } | Diffusion::Rotation { base, amp, .. } => {
                if !(base > amp.abs()) {
                    return Err(invalid("diffusion base must exceed |amp| so sigma stays non-degenerate"));
                }
                let hi = base + amp.abs();
                let lo = base - amp.abs();
                let lambda = hi.max(1.0 / lo);
                let lambda_hs = (hi * sd).max(sd / lo);
                let lip = match *self {
                    Diffusion::Rotation { angle, .. } if dim > 1 => angle.abs() * hi * sd + amp.abs(),
                    _ => amp.abs(),
                };
                Ok((lambda, lip, lambda_hs))
            }
            Diffusion::Custom { .. } => Err(invalid("custom diffusion needs explicit constants")),
        }
    }
}

fn diag_sin(x: &Vector, base: f64, amp: f64) -> Vector {
    let mut d = Vector::zeros(x.dim());
    for i in 0..x.dim() {
        d[i] = base + amp * x[i].sin();
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DissipativityProfile {
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    pub l0: f64,
    pub beta: f64,
}

impl DissipativityProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 >= 0.0) {
            return Err(invalid("K1 must be nonnegative"));
        }
        if !(self.k2 > 0.0) {
            return Err(invalid("K2 must be positive"));
        }
        if !(self.l0 >= 0.0) {
            return Err(invalid("l0 must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(invalid("beta must lie in [0,1]"));
        }
        Ok(())
    }

    /// The bound on `⟨b(x)−b(y), x−y⟩/|x−y|` at distance `r`.
    pub fn bound(&self, r: f64) -> f64 {
        if r < self.l0 {
            self.k1 * r.powf(self.beta)
        } else {
            -self.k2 * r
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoefficientField {
    dim: usize,
    drift: Drift,
    diffusion: Diffusion,
    lambda_nd: f64,
    lip_sigma: f64,
    lambda_hs: f64,
    diagonal: bool,
}

impl CoefficientField {
    pub fn new(dim: usize, drift: Drift, diffusion: Diffusion) -> Result<Self> {
        if !(1..=crate::linalg::MAX_DIM).contains(&dim) {
            return Err(invalid(format!("dim must lie in 1..={}", crate::linalg::MAX_DIM)));
        }
        drift.validate()?;
        let (lambda_nd, lip_sigma, lambda_hs) = diffusion.constants(dim)?;
        let diagonal = diffusion.is_diagonal(dim);
        Ok(CoefficientField { dim, drift, diffusion, lambda_nd, lip_sigma, lambda_hs, diagonal })
    }

    /// Coefficients whose constants are claimed by the caller rather than
    /// derived from a preset.
    pub fn with_claimed_constants(dim: usize, drift: Drift, diffusion: Diffusion, lambda_nd: f64, lip_sigma: f64) -> Result<Self> {
        drift.validate()?;
        if !(lambda_nd >= 1.0) {
            return Err(invalid("lambda must be at least 1"));
        }
        if !(lip_sigma >= 0.0) {
            return Err(invalid("lip_sigma must be nonnegative"));
        }
        let diagonal = diffusion.is_diagonal(dim);
        let sd = (dim as f64).sqrt();
        Ok(CoefficientField { dim, drift, diffusion, lambda_nd, lip_sigma, lambda_hs: lambda_nd * sd, diagonal })
    }

    pub fn additive(dim: usize, drift: Drift, scale: f64) -> Result<Self> {
        CoefficientField::new(dim, drift, Diffusion::Constant { scale })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn drift(&self) -> &Drift {
        &self.drift
    }
    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }
    pub fn lambda_nd(&self) -> f64 {
        self.lambda_nd
    }
    pub fn lip_sigma(&self) -> f64 {
        self.lip_sigma
    }
    /// Bound on ‖σ(x)‖_HS and ‖σ(x)⁻¹‖_HS over all x.
    pub fn lambda_hs(&self) -> f64 {
        self.lambda_hs
    }
    pub fn diagonal(&self) -> bool {
        self.diagonal
    }
    pub fn is_additive(&self) -> bool {
        self.diffusion.is_constant()
    }

    #[inline]
    pub fn b(&self, x: &Vector) -> Vector {
        self.drift.eval(x)
    }

    #[inline]
    pub fn sigma(&self, x: &Vector) -> Matrix {
        self.diffusion.eval(x)
    }

    pub fn sigma_inv(&self, x: &Vector) -> Result<Matrix> {
        self.sigma(x).inverse().ok_or_else(|| Error::Structural(format!("sigma is singular at x={:?}", x.as_slice())))
    }
}

#[derive(Clone, Debug, Default)]
pub struct StructureReport {
    /// min over grid and test vectors of |σ(x)ξ|/|ξ|.
    pub sigma_min_ratio: f64,
    pub sigma_max_ratio: f64,
    pub inverse_min_ratio: f64,
    pub inverse_max_ratio: f64,
    /// max ‖σ(x)σ(x)⁻¹ − I‖_HS.
    pub inverse_error: f64,
    /// max ‖σ(x)−σ(y)‖_HS / |x−y|.
    pub lipschitz_ratio: f64,
    pub worst_nondegeneracy_point: Option<Vector>,
    pub violations: Vec<String>,
}

impl StructureReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn test_vectors(dim: usize) -> Vec<Vector> {
    let mut out: Vec<Vector> = (0..dim).map(|i| Vector::axis(dim, i)).collect();
    out.extend((0..16).map(|i| grid::direction(dim, i + 1)));
    out
}

pub fn verify_structure(cf: &CoefficientField, points: &[Vector], pairs: &[(Vector, Vector)]) -> Result<StructureReport> {
    if points.is_empty() {
        return Err(Error::Precondition("verify_structure needs a nonempty grid".into()));
    }
    let lam = cf.lambda_nd;
    let tol = 1e-12;
    let xis = test_vectors(cf.dim);
    let mut rep = StructureReport { sigma_min_ratio: f64::INFINITY, inverse_min_ratio: f64::INFINITY, ..Default::default() };
    let mut worst_margin = f64::INFINITY;
    for x in points {
        let s = cf.sigma(x);
        let si = cf.sigma_inv(x)?;
        let mut margin = f64::INFINITY;
        for xi in &xis {
            let a = s.mul_vec(xi).norm() / xi.norm();
            let b = si.mul_vec(xi).norm() / xi.norm();
            rep.sigma_min_ratio = rep.sigma_min_ratio.min(a);
            rep.sigma_max_ratio = rep.sigma_max_ratio.max(a);
            rep.inverse_min_ratio = rep.inverse_min_ratio.min(b);
            rep.inverse_max_ratio = rep.inverse_max_ratio.max(b);
            margin = margin.min(a * lam).min(lam / a).min(b * lam).min(lam / b);
        }
        if margin < worst_margin {
            worst_margin = margin;
            rep.worst_nondegeneracy_point = Some(*x);
        }
        let err = s.mul_mat(&si).sub(&Matrix::identity(cf.dim)).frobenius();
        rep.inverse_error = rep.inverse_error.max(err);
    }
    for (x, y) in pairs {
        let d = (*x - *y).norm();
        if d > 0.0 {
            let r = cf.sigma(x).sub(&cf.sigma(y)).frobenius() / d;
            rep.lipschitz_ratio = rep.lipschitz_ratio.max(r);
        }
    }
    let near = rep.worst_nondegeneracy_point.map(|p| format!("{:?}", p.as_slice())).unwrap_or_default();
    if rep.sigma_min_ratio < (1.0 - tol) / lam || rep.sigma_max_ratio > lam * (1.0 + tol) {
        rep.violations.push(format!(
            "sigma gain range [{:.6e}, {:.6e}] leaves [1/{lam}, {lam}]; worst near x={near}",
            rep.sigma_min_ratio, rep.sigma_max_ratio
        ));
    }
    if rep.inverse_min_ratio < (1.0 - tol) / lam || rep.inverse_max_ratio > lam * (1.0 + tol) {
        rep.violations.push(format!(
            "inverse gain range [{:.6e}, {:.6e}] leaves [1/{lam}, {lam}]; worst near x={near}",
            rep.inverse_min_ratio, rep.inverse_max_ratio
        ));
    }
    if rep.inverse_error > 1e-10 {
        rep.violations.push(format!("sigma*sigma_inv deviates from identity by {:.3e}", rep.inverse_error));
    }
    if rep.lipschitz_ratio > cf.lip_sigma * (1.0 + tol) + 1e-12 {
        rep.violations.push(format!("observed Lipschitz ratio {:.6e} exceeds claimed {}", rep.lipschitz_ratio, cf.lip_sigma));
    }
    Ok(rep)
}

#[derive(Clone, Debug, Default)]
pub struct DissipativityReport {
    /// max over pairs with |x−y| < l₀ of drift ratio − K₁|x−y|^β.
    pub near_violation: f64,
    /// max over pairs with |x−y| ≥ l₀ of drift ratio + K₂|x−y|.
    pub far_violation: f64,
    pub near_pairs: usize,
    pub far_pairs: usize,
    pub failing_pairs: usize,
}

impl DissipativityReport {
    pub fn passed(&self) -> bool {
        self.failing_pairs == 0
    }
}

pub fn dissipativity_check(cf: &CoefficientField, prof: &DissipativityProfile, pairs: &[(Vector, Vector)]) -> DissipativityReport {
    let mut rep = DissipativityReport { near_violation: f64::NEG_INFINITY, far_violation: f64::NEG_INFINITY, ..Default::default() };
    for (x, y) in pairs {
        let diff = *x - *y;
        let r = diff.norm();
        if r == 0.0 {
            continue;
        }
        let ratio = (cf.b(x) - cf.b(y)).dot(&diff) / r;
        let excess = ratio - prof.bound(r);
        // Rounding in the inner product scales with the drift magnitudes.
        let slack = 1e-12 * (1.0 + cf.b(x).norm() + cf.b(y).norm()) * (1.0 + r);
        if r < prof.l0 {
            rep.near_pairs += 1;
            rep.near_violation = rep.near_violation.max(excess);
        } else {
            rep.far_pairs += 1;
            rep.far_violation = rep.far_violation.max(excess);
        }
        if excess > slack {
            rep.failing_pairs += 1;
        }
    }
    rep
}

/// The default structural grid: 10³ Sobol points in `[−10,10]^d`.
pub fn default_points(dim: usize) -> Vec<Vector> {
    grid::sobol_cube(dim, 1000, -10.0, 10.0)
}

/// The default pair set: 10³ pairs with distances log-spaced in `[10⁻⁴, 20]`.
pub fn default_pairs(dim: usize) -> Vec<(Vector, Vector)> {
    grid::log_spaced_pairs(dim, 1000, 1e-4, 20.0, -10.0, 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v1(x: f64) -> Vector {
        Vector::from_slice(&[x])
    }

    #[test]
    fn identity_sigma_verifies() {
        let cf = CoefficientField::additive(2, Drift::Zero, 1.0).unwrap();
        assert_eq!(cf.lambda_nd(), 1.0);
        assert_eq!(cf.lip_sigma(), 0.0);
        let rep = verify_structure(&cf, &default_points(2), &default_pairs(2)).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        assert_eq!(rep.lipschitz_ratio, 0.0);
    }

    #[test]
    fn sin_diagonal_passes_with_dense_grid() {
        let cf = CoefficientField::new(1, Drift::Zero, Diffusion::DiagonalSin { base: 2.0, amp: 1.0 }).unwrap();
        assert_eq!((cf.lambda_nd(), cf.lip_sigma()), (3.0, 1.0));
        let pts: Vec<Vector> = grid::lin_space(-10.0, 10.0, 20_001).into_iter().map(v1).collect();
        let pairs: Vec<(Vector, Vector)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
        let rep = verify_structure(&cf, &pts, &pairs).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
        // the dense grid gets close to both extremes of 2 + sin x
        assert!((rep.sigma_max_ratio - 3.0).abs() < 1e-6 && (rep.sigma_min_ratio - 1.0).abs() < 1e-6);
        assert!(rep.lipschitz_ratio <= 1.0 && rep.lipschitz_ratio > 0.999);
    }

    fn identity_map() -> Diffusion {
        Diffusion::Custom { sigma: Arc::new(|x: &Vector| Matrix::scalar(1, x[0])), diagonal: true }
    }

    #[test]
    fn degenerate_sigma_flagged_near_zero() {
        let cf = CoefficientField::with_claimed_constants(1, Drift::Zero, identity_map(), 2.0, 1.0).unwrap();
        // offset so no grid point lands exactly on the singularity
        let pts: Vec<Vector> = grid::lin_space(-10.0, 10.0, 1000).into_iter().map(v1).collect();
        let rep = verify_structure(&cf, &pts, &default_pairs(1)).unwrap();
        assert!(!rep.passed());
        let worst = rep.worst_nondegeneracy_point.unwrap();
        assert!(worst[0].abs() < 0.05, "{worst:?}");
    }

    #[test]
    fn singular_grid_point_is_structural_error() {
        let cf = CoefficientField::with_claimed_constants(1, Drift::Zero, identity_map(), 2.0, 1.0).unwrap();
        let err = verify_structure(&cf, &[v1(1.0), v1(0.0)], &[]).unwrap_err();
        assert!(matches!(err, Error::Structural(ref m) if m.contains("[0.0]")), "{err}");
    }

    #[test]
    fn rotation_constants_hold_on_grid() {
        let cf = CoefficientField::new(2, Drift::Zero, Diffusion::Rotation { base: 2.0, amp: 1.0, angle: 0.5 }).unwrap();
        assert!(!cf.diagonal());
        let rep = verify_structure(&cf, &default_points(2), &default_pairs(2)).unwrap();
        assert!(rep.passed(), "{:?}", rep.violations);
    }

    #[test]
    fn report_monotone_under_refinement() {
        let cf = CoefficientField::new(2, Drift::Zero, Diffusion::DiagonalSin { base: 2.0, amp: 1.0 }).unwrap();
        let pts = grid::sobol_cube(2, 400, -10.0, 10.0);
        let pairs = grid::log_spaced_pairs(2, 400, 1e-4, 20.0, -10.0, 10.0);
        let coarse = verify_structure(&cf, &pts[..100], &pairs[..100]).unwrap();
        let fine = verify_structure(&cf, &pts, &pairs).unwrap();
        assert!(fine.sigma_min_ratio <= coarse.sigma_min_ratio);
        assert!(fine.sigma_max_ratio >= coarse.sigma_max_ratio);
        assert!(fine.lipschitz_ratio >= coarse.lipschitz_ratio);
        assert!(fine.inverse_error >= coarse.inverse_error);
    }

    #[test]
    fn linear_drift_has_zero_slack() {
        let cf = CoefficientField::additive(2, Drift::Linear { rate: 1.0 }, 1.0).unwrap();
        let prof = DissipativityProfile { k1: 0.0, k2: 1.0, l0: 0.0, beta: 1.0 };
        let rep = dissipativity_check(&cf, &prof, &default_pairs(2));
        assert!(rep.passed());
        assert!(rep.far_violation.abs() < 1e-9);
    }

    #[test]
    fn sin_drift_profile_passes_dense_pairs() {
        let cf = CoefficientField::additive(1, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, 1.0).unwrap();
        let prof = DissipativityProfile { k1: 2.0, k2: 0.5, l0: 4.0, beta: 1.0 };
        assert_eq!(cf.drift().default_profile(1), Some(prof));
        let mut pairs = Vec::new();
        for x in grid::lin_space(-15.0, 15.0, 301) {
            for r in grid::log_space(1e-4, 30.0, 120) {
                pairs.push((v1(x), v1(x + r)));
            }
        }
        let rep = dissipativity_check(&cf, &prof, &pairs);
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.near_pairs > 0 && rep.far_pairs > 0);
    }

    #[test]
    fn anti_dissipative_drift_fails_far_pairs() {
        let cf = CoefficientField::additive(1, Drift::Linear { rate: -1.0 }, 1.0).unwrap();
        let prof = DissipativityProfile { k1: 1.0, k2: 0.5, l0: 2.0, beta: 1.0 };
        let pairs = default_pairs(1);
        let rep = dissipativity_check(&cf, &prof, &pairs);
        let far = pairs.iter().filter(|(x, y)| (*x - *y).norm() >= 2.0).count();
        assert_eq!(rep.failing_pairs, far);
        assert!(rep.far_violation > 0.0);
    }

    #[test]
    fn preset_profiles_hold() {
        let drifts = [
            Drift::SignPerturbed { rate: 1.0, amp: 0.5 },
            Drift::HolderPerturbed { rate: 1.0, amp: 0.5, beta: 0.75 },
            Drift::SinPerturbed { rate: 0.7, amp: 1.3 },
        ];
        for dim in 1..=2 {
            for drift in &drifts {
                let prof = drift.default_profile(dim).unwrap();
                let cf = CoefficientField::additive(dim, drift.clone(), 1.0).unwrap();
                let rep = dissipativity_check(&cf, &prof, &default_pairs(dim));
                assert!(rep.passed(), "{drift:?} d={dim}: {rep:?}");
            }
        }
    }
}
