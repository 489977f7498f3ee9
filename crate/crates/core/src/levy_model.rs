//! Truncated-stable Lévy measures `q(z) = c₀|z|^{-d-α}·1_S(z)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{Vector, MAX_DIM};
use crate::quadrature::{self, AngularRanges, Estimate, QuadOptions, RadialRange};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportVariant {
    /// All of ℝ^d.
    FullSpace,
    /// `|z| ≤ η`.
    Ball,
    /// `0 < z₁ ≤ η`.
    HalfSlab,
    /// `|z₁| ≤ η`.
    Slab,
}

impl SupportVariant {
    pub const ALL: [SupportVariant; 4] = [SupportVariant::Ball, SupportVariant::HalfSlab, SupportVariant::Slab, SupportVariant::FullSpace];

    pub fn name(&self) -> &'static str {
        match self {
            SupportVariant::FullSpace => "full_space",
            SupportVariant::Ball => "ball",
            SupportVariant::HalfSlab => "half_slab",
            SupportVariant::Slab => "slab",
        }
    }

    /// Symmetric under z ↦ −z, so the compensator vanishes.
    pub fn is_symmetric(&self) -> bool {
        !matches!(self, SupportVariant::HalfSlab)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevyModel {
    dim: usize,
    alpha: f64,
    c0: f64,
    eta: f64,
    variant: SupportVariant,
    envelope: Option<Box<LevyModel>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// `∫_{|z|≤1} |z|² ν(dz)`.
    pub small_square: f64,
    /// `∫_{|z|>1} |z| ν(dz)`, `+∞` when divergent.
    pub big_first: f64,
    pub big_first_finite: bool,
    pub residual: f64,
}

impl LevyModel {
    pub fn new(dim: usize, alpha: f64, c0: f64, eta: f64, variant: SupportVariant) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(invalid(format!("dim must lie in 1..={MAX_DIM}, got {dim}")));
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(invalid("alpha must lie in (0,2)"));
        }
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(invalid("c0 must be positive"));
        }
        if !(eta > 0.0 && eta <= 1.0) {
            return Err(invalid("eta must lie in (0,1]"));
        }
        Ok(LevyModel { dim, alpha, c0, eta, variant, envelope: None })
    }

    /// Attach the driving measure ν for which `self` is the coupling
    /// sub-measure ν₀ ≤ ν.
    pub fn with_envelope(mut self, envelope: LevyModel) -> Result<Self> {
        if envelope.envelope.is_some() {
            return Err(invalid("an envelope cannot carry its own envelope"));
        }
        if envelope.dim != self.dim {
            return Err(invalid("envelope dimension differs from the model"));
        }
        if !self.dominated_by(&envelope) {
            return Err(invalid("model density is not dominated by the envelope density"));
        }
        self.envelope = Some(Box::new(envelope));
        Ok(self)
    }

    fn dominated_by(&self, nu: &LevyModel) -> bool {
        use SupportVariant::*;
        if self.c0 > nu.c0 || self.alpha > nu.alpha {
            return false;
        }
        let bounded = self.support_radius().is_some();
        if self.alpha < nu.alpha && !(bounded && self.eta <= 1.0) {
            return false;
        }
        let d1 = self.dim == 1;
        match (self.variant, nu.variant) {
            (_, FullSpace) => true,
            (FullSpace, _) => false,
            (Ball, Ball) | (Ball, Slab) => self.eta <= nu.eta,
            (Ball, HalfSlab) => false,
            (HalfSlab, _) => self.eta <= nu.eta,
            (Slab, Slab) => self.eta <= nu.eta,
            (Slab, Ball) => d1 && self.eta <= nu.eta,
            (Slab, HalfSlab) => false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn variant(&self) -> SupportVariant {
        self.variant
    }
    pub fn envelope(&self) -> Option<&LevyModel> {
        self.envelope.as_deref()
    }

    /// The measure that drives the noise: the envelope if present.
    pub fn driving(&self) -> &LevyModel {
        self.envelope.as_deref().unwrap_or(self)
    }

    pub fn in_support(&self, z: &Vector) -> bool {
        match self.variant {
            SupportVariant::FullSpace => true,
            SupportVariant::Ball => z.norm() <= self.eta,
            SupportVariant::HalfSlab => z[0] > 0.0 && z[0] <= self.eta,
            SupportVariant::Slab => z[0].abs() <= self.eta,
        }
    }

    pub fn density(&self, z: &Vector) -> Result<f64> {
        if z.is_zero() {
            return Err(Error::Domain("density has a pole at z = 0".into()));
        }
        Ok(self.q(z))
    }

    /// Density without the pole check; `z = 0` yields `+∞` on support.
    #[inline]
    pub fn q(&self, z: &Vector) -> f64 {
        if !self.in_support(z) {
            return 0.0;
        }
        self.c0 * z.norm().powf(-(self.dim as f64) - self.alpha)
    }

    /// Radius of a ball containing the support, if bounded.
    pub fn support_radius(&self) -> Option<f64> {
        match (self.variant, self.dim) {
            (SupportVariant::Ball, _) => Some(self.eta),
            (SupportVariant::FullSpace, _) => None,
            (_, 1) => Some(self.eta),
            _ => None,
        }
    }

    /// Upper radial limit used by quadrature.
    pub fn far_radius(&self) -> f64 {
        match self.support_radius() {
            Some(r) => r,
            None if self.variant == SupportVariant::FullSpace => 1e16,
            None => 1e8,
        }
    }

    /// Fraction of the unit sphere inside the support at radii below η.
    pub fn small_sphere_fraction(&self) -> f64 {
        match self.variant {
            SupportVariant::HalfSlab => 0.5,
            _ => 1.0,
        }
    }

    /// Angular ranges of the support on the sphere of radius `r`.
    pub fn angular_ranges(&self, r: f64) -> AngularRanges {
        let full = quadrature::full_sphere(self.dim);
        match self.variant {
            SupportVariant::FullSpace => full,
            SupportVariant::Ball => {
                if r <= self.eta {
                    full
                } else {
                    Vec::new()
                }
            }
            SupportVariant::HalfSlab => {
                let t = (self.eta / r).min(1.0);
                match self.dim {
                    1 => {
                        if r <= self.eta {
                            vec![(1.0, 1.0)]
                        } else {
                            Vec::new()
                        }
                    }
                    2 => {
                        let a = t.acos();
                        vec![(-PI / 2.0, -a), (a, PI / 2.0)]
                    }
                    _ => vec![(0.0, t)],
                }
            }
            SupportVariant::Slab => {
                let t = (self.eta / r).min(1.0);
                match self.dim {
                    1 => {
                        if r <= self.eta {
                            full
                        } else {
                            Vec::new()
                        }
                    }
                    2 => {
                        let a = t.acos();
                        vec![(-PI + a, -a), (a, PI - a)]
                    }
                    _ => vec![(-t, t)],
                }
            }
        }
    }

    fn natural_breaks(&self) -> Vec<f64> {
        vec![self.eta, 1.0]
    }

    /// `∫_{r_lo<|z|<r_hi} F(z) dz` where `F` already carries any density
    /// factor and vanishes off the support.
    pub fn integrate_over_support<F: Fn(&Vector) -> f64>(
        &self,
        f: F,
        r_lo: f64,
        r_hi: f64,
        extra_breaks: &[f64],
        opts: &QuadOptions,
    ) -> Estimate {
        self.integrate_over_support_split(f, r_lo, r_hi, extra_breaks, |_| Vec::new(), opts)
    }

    /// [`Self::integrate_over_support`] with per-radius angular breakpoints
    /// (2-d polar angles) where `f` is non-smooth.
    pub fn integrate_over_support_split<F: Fn(&Vector) -> f64, B: Fn(f64) -> Vec<f64>>(
        &self,
        f: F,
        r_lo: f64,
        r_hi: f64,
        extra_breaks: &[f64],
        angular_breaks: B,
        opts: &QuadOptions,
    ) -> Estimate {
        let r_hi = r_hi.min(self.far_radius());
        let range = RadialRange::new(r_lo, r_hi).with_breaks(self.natural_breaks()).with_breaks(extra_breaks.iter().copied());
        quadrature::integrate_polar_split(self.dim, f, &range, |r| self.angular_ranges(r), angular_breaks, opts)
    }

    /// `∫_{r_lo<|z|<r_hi} g(z) ν(dz)`.
    pub fn integrate_against<G: Fn(&Vector) -> f64>(
        &self,
        g: G,
        r_lo: f64,
        r_hi: f64,
        extra_breaks: &[f64],
        opts: &QuadOptions,
    ) -> Estimate {
        self.integrate_over_support(
            |z| {
                let q = self.q(z);
                if q == 0.0 {
                    0.0
                } else {
                    q * g(z)
                }
            },
            r_lo,
            r_hi,
            extra_breaks,
            opts,
        )
    }

    pub fn moment_integrals(&self, opts: &QuadOptions) -> Result<Moments> {
        let a = self.alpha;
        let omega = quadrature::sphere_area(self.dim);
        // Analytic core below r_lo, where every variant covers a fixed
        // fraction of each sphere.
        let r_lo = 1e-8 * self.eta;
        let core = self.c0 * omega * self.small_sphere_fraction() * r_lo.powf(2.0 - a) / (2.0 - a);
        let sq = self.integrate_against(|z| z.norm_sq(), r_lo, 1.0, &[], opts).require(opts, 10.0, "small_square")?;
        let small_square = sq.value + core;

        let mut residual = sq.error;
        let (big_first, finite) = if self.support_radius().is_some_and(|r| r <= 1.0) {
            (0.0, true)
        } else if self.variant == SupportVariant::FullSpace && a <= 1.0 {
            (f64::INFINITY, false)
        } else {
            let far = self.far_radius();
            let est = self.integrate_against(|z| z.norm(), 1.0, far, &[], opts).require(opts, 10.0, "big_first")?;
            residual += est.error;
            let tail = if self.variant == SupportVariant::FullSpace { self.c0 * omega * far.powf(1.0 - a) / (a - 1.0) } else { 0.0 };
            (est.value + tail, true)
        };
        Ok(Moments { small_square, big_first, big_first_finite: finite, residual })
    }

    /// `ν({|z| > δ})`.
    pub fn mass_outside(&self, delta: f64, opts: &QuadOptions) -> Result<f64> {
        let a = self.alpha;
        let omega = quadrature::sphere_area(self.dim);
        let pw = |r: f64| r.powf(-a);
        match (self.variant, self.dim) {
            (SupportVariant::FullSpace, _) => Ok(self.c0 * omega * pw(delta) / a),
            (SupportVariant::Ball, _) | (SupportVariant::Slab, 1) => Ok(self.c0 * omega * (pw(delta) - pw(self.eta)).max(0.0) / a),
            (SupportVariant::HalfSlab, 1) => Ok(self.c0 * (pw(delta) - pw(self.eta)).max(0.0) / a),
            _ => {
                let est = self.integrate_over_support(|z| self.q(z), delta, self.far_radius(), &[], opts).require(
                    opts,
                    10.0,
                    "mass outside truncation",
                )?;
                Ok(est.value)
            }
        }
    }

    /// `−∫_{δ<|z|≤1} z ν(dz)`.
    pub fn compensator_drift(&self, delta: f64, opts: &QuadOptions) -> Result<Vector> {
        let mut out = Vector::zeros(self.dim);
        if self.variant.is_symmetric() || delta >= 1.0 {
            return Ok(out);
        }
        let a = self.alpha;
        let hi = 1.0_f64.min(self.far_radius());
        if self.dim == 1 {
            if delta >= hi {
                return Ok(out);
            }
            let integral = if (a - 1.0).abs() < 1e-15 { (hi / delta).ln() } else { (hi.powf(1.0 - a) - delta.powf(1.0 - a)) / (1.0 - a) };
            out[0] = -self.c0 * integral;
            return Ok(out);
        }
        // Only z₁ survives: the half-slab is symmetric in the other axes.
        let est = self.integrate_against(|z| z[0], delta, 1.0, &[], opts).require(opts, 10.0, "compensator drift")?;
        out[0] = -est.value;
        Ok(out)
    }

    pub fn sample_jumps<R: Rng + ?Sized>(&self, horizon: f64, delta: f64, rng: &mut R) -> Result<Vec<Jump>> {
        let sampler = JumpSampler::new(self, delta)?;
        Ok(sampler.sample(horizon, rng))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jump {
    pub time: f64,
    pub size: Vector,
}

/// Compound-Poisson sampler for ν restricted to `{|z| > δ}`.
///
/// Sizes come from a radial power law with uniform direction, rejected
/// against the support; on the support the shapes agree, so the accepted
/// draws follow the normalized restriction exactly.
#[derive(Clone, Debug)]
pub struct JumpSampler {
    model: LevyModel,
    delta: f64,
    rate: f64,
    /// `δ^{-α}` and `r_max^{-α}` for inverse-CDF radius draws.
    lo_pow: f64,
    hi_pow: f64,
}

impl JumpSampler {
    pub fn new(model: &LevyModel, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(invalid("truncation delta must be positive"));
        }
        if delta >= model.eta {
            return Err(Error::EmptySupport(format!("truncation delta={delta} is not below eta={}", model.eta)));
        }
        let rate = model.mass_outside(delta, &QuadOptions::default().with_rel_tol(1e-10))?;
        let a = model.alpha;
        let hi_pow = match model.support_radius() {
            Some(r) => r.powf(-a),
            None => 0.0,
        };
        Ok(JumpSampler { model: model.clone(), delta, rate, lo_pow: delta.powf(-a), hi_pow })
    }

    /// Total intensity `ν({|z|>δ})`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn sample_size<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let a = self.model.alpha;
        loop {
            let u: f64 = rng.random();
            let r = (self.lo_pow - u * (self.lo_pow - self.hi_pow)).powf(-1.0 / a);
            let z = random_direction(self.model.dim, rng).scale(r);
            if r > self.delta && self.model.in_support(&z) {
                return z;
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, horizon: f64, rng: &mut R) -> Vec<Jump> {
        let mean = self.rate * horizon;
        if !(mean > 0.0) {
            return Vec::new();
        }
        let n = Poisson::new(mean).expect("finite positive mean").sample(rng) as usize;
        let mut times: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * horizon).collect();
        times.sort_by(f64::total_cmp);
        times.into_iter().map(|time| Jump { time, size: self.sample_size(rng) }).collect()
    }
}

pub fn random_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vector {
    match dim {
        1 => Vector::from_slice(&[if rng.random::<bool>() { 1.0 } else { -1.0 }]),
        2 => {
            let phi = 2.0 * PI * rng.random::<f64>();
            let (s, c) = phi.sin_cos();
            Vector::from_slice(&[c, s])
        }
        _ => {
            let u = 2.0 * rng.random::<f64>() - 1.0;
            let phi = 2.0 * PI * rng.random::<f64>();
            let rho = (1.0 - u * u).max(0.0).sqrt();
            let (s, c) = phi.sin_cos();
            Vector::from_slice(&[u, rho * c, rho * s])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ball1(alpha: f64) -> LevyModel {
        LevyModel::new(1, alpha, 1.0, 1.0, SupportVariant::Ball).unwrap()
    }

    fn v(s: &[f64]) -> Vector {
        Vector::from_slice(s)
    }

    #[test]
    fn density_examples() {
        let m = ball1(0.5);
        assert!((m.density(&v(&[0.5])).unwrap() - 2f64.powf(1.5)).abs() < 1e-14);
        assert_eq!(m.density(&v(&[2.0])).unwrap(), 0.0);
        let h = LevyModel::new(2, 1.0, 1.0, 1.0, SupportVariant::HalfSlab).unwrap();
        assert_eq!(h.density(&v(&[-0.1, 0.2])).unwrap(), 0.0);
        assert!(matches!(m.density(&v(&[0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_bad_parameters() {
        let e = LevyModel::new(1, 2.5, 1.0, 1.0, SupportVariant::Ball).unwrap_err();
        assert_eq!(e, Error::InvalidParameter("alpha must lie in (0,2)".into()));
        assert!(LevyModel::new(1, 0.5, 1.0, 1.5, SupportVariant::Ball).is_err());
        assert!(LevyModel::new(1, 0.5, 0.0, 1.0, SupportVariant::Ball).is_err());
    }

    #[test]
    fn moment_examples() {
        let opts = QuadOptions::default();
        let m = ball1(0.5).moment_integrals(&opts).unwrap();
        assert!((m.small_square / (4.0 / 3.0) - 1.0).abs() < 1e-6);
        assert_eq!(m.big_first, 0.0);
        let m = ball1(1.5).moment_integrals(&opts).unwrap();
        assert!((m.small_square / 4.0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn one_dim_moments_match_antiderivatives() {
        let opts = QuadOptions::default();
        for &alpha in &[0.3, 0.9, 1.2, 1.8] {
            for &eta in &[0.4f64, 1.0] {
                let c0 = 0.7;
                let s2 = 2.0 - alpha;
                let cases = [
                    (SupportVariant::Ball, 2.0 * c0 * eta.powf(s2) / s2),
                    (SupportVariant::Slab, 2.0 * c0 * eta.powf(s2) / s2),
                    (SupportVariant::HalfSlab, c0 * eta.powf(s2) / s2),
                    (SupportVariant::FullSpace, 2.0 * c0 / s2),
                ];
                for (variant, want) in cases {
                    let m = LevyModel::new(1, alpha, c0, eta, variant).unwrap();
                    let got = m.moment_integrals(&opts).unwrap();
                    assert!((got.small_square / want - 1.0).abs() < 1e-6, "{variant:?} {alpha} {eta}");
                    if variant == SupportVariant::FullSpace {
                        if alpha > 1.0 {
                            let want_big = 2.0 * c0 / (alpha - 1.0);
                            assert!((got.big_first / want_big - 1.0).abs() < 1e-6);
                        } else {
                            assert!(!got.big_first_finite && got.big_first.is_infinite());
                        }
                    } else {
                        assert_eq!(got.big_first, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn two_dim_ball_moment_closed_form() {
        let m = LevyModel::new(2, 0.8, 1.0, 0.6, SupportVariant::Ball).unwrap();
        let got = m.moment_integrals(&QuadOptions::default()).unwrap();
        let want = 2.0 * PI * 0.6f64.powf(1.2) / 1.2;
        assert!((got.small_square / want - 1.0).abs() < 1e-7);
    }

    #[test]
    fn slab_big_first_is_finite_in_2d() {
        let m = LevyModel::new(2, 0.5, 1.0, 1.0, SupportVariant::Slab).unwrap();
        let got = m.moment_integrals(&QuadOptions::default().with_rel_tol(1e-7)).unwrap();
        assert!(got.big_first_finite && got.big_first.is_finite() && got.big_first > 0.0);
    }

    #[test]
    fn compensator_examples() {
        let opts = QuadOptions::default();
        assert!(ball1(0.5).compensator_drift(0.1, &opts).unwrap().is_zero());
        let h = LevyModel::new(2, 0.5, 1.0, 1.0, SupportVariant::HalfSlab).unwrap();
        assert!(h.compensator_drift(1.0, &opts).unwrap().is_zero());
        let c = h.compensator_drift(0.1, &opts).unwrap();
        // −∫_{-π/2}^{π/2} cos φ dφ ∫_{0.1}^{1} r^{-0.5} dr
        let want = -2.0 * 2.0 * (1.0 - 0.1f64.sqrt());
        assert!((c[0] - want).abs() < 1e-8, "{c:?}");
        assert!((-2.735_088_936 - want).abs() < 1e-9);
        assert_eq!(c[1], 0.0);
    }

    #[test]
    fn jump_count_mean() {
        let m = ball1(0.5);
        let s = JumpSampler::new(&m, 0.25).unwrap();
        assert!((s.rate() - 4.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let total: usize = (0..n).map(|_| s.sample(1.0, &mut rng).len()).sum();
        let mean = total as f64 / n as f64;
        // Poisson(4): sd of the mean is 2/sqrt(n)
        assert!((mean - 4.0).abs() < 3.0 * 2.0 / (n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn zero_horizon_and_bad_truncation() {
        let m = ball1(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(m.sample_jumps(0.0, 0.1, &mut rng).unwrap().is_empty());
        assert!(matches!(m.sample_jumps(1.0, 1.0, &mut rng), Err(Error::EmptySupport(_))));
    }

    #[test]
    fn sampled_sizes_respect_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for variant in SupportVariant::ALL {
            for dim in 1..=3 {
                let m = LevyModel::new(dim, 1.1, 1.0, 0.8, variant).unwrap();
                let s = JumpSampler::new(&m, 0.05).unwrap();
                for _ in 0..2000 {
                    let z = s.sample_size(&mut rng);
                    assert!(z.norm() > 0.05 && m.in_support(&z), "{variant:?} {z:?}");
                }
            }
        }
    }

    #[test]
    fn annulus_fractions_match_measure() {
        let m = LevyModel::new(2, 0.7, 1.0, 1.0, SupportVariant::HalfSlab).unwrap();
        let s = JumpSampler::new(&m, 0.1).unwrap();
        let opts = QuadOptions::default();
        let annuli = [(0.1, 0.2), (0.2, 0.5), (0.5, 2.0), (2.0, 50.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| s.sample_size(&mut rng).norm()).collect();
        for (lo, hi) in annuli {
            let p = m.integrate_over_support(|z| m.q(z), lo, hi, &[], &opts).value / s.rate();
            let frac = draws.iter().filter(|&&r| r > lo && r <= hi).count() as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((frac - p).abs() < 4.0 * se, "annulus ({lo},{hi}): {frac} vs {p}");
        }
    }

    #[test]
    fn sampler_rate_matches_quadrature_for_analytic_cases() {
        let opts = QuadOptions::default();
        for variant in [SupportVariant::Ball, SupportVariant::FullSpace] {
            let m = LevyModel::new(2, 1.3, 0.5, 0.9, variant).unwrap();
            let analytic = m.mass_outside(0.05, &opts).unwrap();
            let quad = m.integrate_over_support(|z| m.q(z), 0.05, m.far_radius(), &[], &opts).value;
            let tail = if variant == SupportVariant::FullSpace { 0.5 * 2.0 * PI * m.far_radius().powf(-1.3) / 1.3 } else { 0.0 };
            assert!(((quad + tail) / analytic - 1.0).abs() < 1e-8, "{variant:?}");
        }
    }

    #[test]
    fn envelope_domination() {
        let nu0 = LevyModel::new(2, 0.5, 1.0, 0.5, SupportVariant::HalfSlab).unwrap();
        let nu = LevyModel::new(2, 0.5, 2.0, 1.0, SupportVariant::FullSpace).unwrap();
        let m = nu0.clone().with_envelope(nu.clone()).unwrap();
        assert_eq!(m.driving(), &nu);
        assert!(nu.clone().with_envelope(nu0.clone()).is_err());
        let ball = LevyModel::new(2, 0.5, 1.0, 0.5, SupportVariant::Ball).unwrap();
        assert!(ball.with_envelope(LevyModel::new(2, 0.5, 1.0, 1.0, SupportVariant::HalfSlab).unwrap()).is_err());
        let lighter = LevyModel::new(2, 0.3, 1.0, 0.5, SupportVariant::Ball).unwrap();
        assert!(lighter.with_envelope(nu).is_ok());
    }

    proptest! {
        #[test]
        fn density_is_homogeneous(x in -0.5f64..0.5, y in -0.5f64..0.5, lam in 0.1f64..1.0, alpha in 0.05f64..1.95) {
            prop_assume!(x.abs() + y.abs() > 1e-3);
            let m = LevyModel::new(2, alpha, 1.3, 1.0, SupportVariant::Ball).unwrap();
            let z = v(&[x, y]);
            let q = m.q(&z);
            let ql = m.q(&z.scale(lam));
            let want = lam.powf(-2.0 - alpha) * q;
            prop_assert!((ql - want).abs() <= 1e-12 * want);
        }

        #[test]
        fn density_is_nonnegative(x in -3.0f64..3.0, y in -3.0f64..3.0, k in 0usize..4) {
            prop_assume!(x != 0.0 || y != 0.0);
            let m = LevyModel::new(2, 1.0, 1.0, 0.7, SupportVariant::ALL[k]).unwrap();
            prop_assert!(m.density(&v(&[x, y])).unwrap() >= 0.0);
        }
    }
}
