//! Rate certificates built from the coupling (J and K curves, the concave
//! contraction profile ψ with its rate λ and constant C, the λ_ψ(ε) gradient
//! envelope) and empirical decay fits from simulated ensembles.

use rayon::prelude::*;

use crate::coefficient_field::{CoefficientField, DissipativityProfile};
use crate::coupling_kernel::{Branch, CouplingKernel};
use crate::error::{invalid, Error, Result};
use crate::generator_quadrature::generator_l;
use crate::grid::{direction, log_space, sobol_cube};
use crate::levy_model::LevyModel;
use crate::linalg::Vector;
use crate::quadrature::{self, QuadOptions};
use crate::sde_simulator::{coupling_time_ensemble, Recording, SimConfig, Simulator, SurvivalCurve};
use crate::stats::{self, LinearFit, PermutationTest};
use crate::test_functions::{LogCorrected, PowerCapped, RadialFn, Scaled, SharedFn, SmoothFn, SmoothNorm};

/// Pairs at a prescribed distance, anchored at Sobol points of `[-5, 5]^d`.
fn pairs_at(dim: usize, r: f64, n: usize, salt: usize) -> Vec<(Vector, Vector)> {
    sobol_cube(dim, n + salt, -5.0, 5.0)
        .into_iter()
        .skip(salt)
        .enumerate()
        .map(|(i, x)| {
            let y = x + direction(dim, i + salt).scale(r);
            (x, y)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct JKCurves {
    pub radii: Vec<f64>,
    /// `J(r)`: smallest sampled `μ_Ψ(ℝ^d)` over pairs with `|x−y| ≤ r`.
    pub j: Vec<f64>,
    /// `K(r)`: largest sampled `μ_Ψ(ℝ^d)|x−y| + ∫_{|z|≤2}|z|(μ_Ψ+μ_{Ψ⁻¹})`
    /// over pairs with `|x−y| = r`.
    pub k: Vec<f64>,
    /// Least-squares fit of `log J` against `log r`.
    pub j_fit: LinearFit,
    pub samples_per_radius: usize,
}

impl JKCurves {
    pub fn exponent(&self) -> f64 {
        self.j_fit.slope
    }

    /// The fitted power law `a·r^s`.
    pub fn j_power(&self, r: f64) -> f64 {
        self.j_fit.intercept.exp() * r.powf(self.j_fit.slope)
    }

    /// A lower bound for `J(r)` read off the samples (J is nonincreasing),
    /// or `None` below the smallest sampled radius.
    pub fn j_lower(&self, r: f64) -> Option<f64> {
        self.radii.iter().zip(&self.j).filter(|(&ri, _)| ri >= r * (1.0 - 1e-12)).min_by(|a, b| a.0.total_cmp(b.0)).map(|(_, &j)| j)
    }
}

pub fn estimate_j_k(k: &CouplingKernel, radii: &[f64], samples: usize, opts: &QuadOptions) -> Result<JKCurves> {
    if radii.len() < 3 || samples == 0 {
        return Err(invalid("estimate_j_k needs at least 3 radii and 1 sample per radius"));
    }
    if let Some(r) = radii.iter().find(|&&r| !(r > 0.0 && r <= k.kappa())) {
        return Err(invalid(format!("radius {r} is outside (0, kappa={}]", k.kappa())));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let dim = k.dim();
    let per_radius: Result<Vec<(f64, f64)>> = radii
        .par_iter()
        .enumerate()
        .map(|(ri, &r)| {
            let mut jmin = f64::INFINITY;
            let mut kmax = 0.0f64;
            for (x, y) in pairs_at(dim, r, samples, ri * samples) {
                let pm = k.pair(&x, &y)?;
                let mass = pm.mu_mass(opts)?.value;
                let fa = pm.mu_first_moment(Branch::Coalesce, 2.0, opts)?.value;
                let fb = pm.mu_first_moment(Branch::Reflect, 2.0, opts)?.value;
                jmin = jmin.min(mass);
                kmax = kmax.max(mass * r + fa + fb);
            }
            Ok((jmin, kmax))
        })
        .collect();
    let per_radius = per_radius?;
    // inf over |x−y| ≤ r includes every smaller sampled radius
    let mut j = Vec::with_capacity(radii.len());
    let mut running = f64::INFINITY;
    for &(jm, _) in &per_radius {
        running = running.min(jm);
        j.push(running);
    }
    let k_curve = per_radius.iter().map(|p| p.1).collect();
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = j.iter().map(|v| v.ln()).collect();
    let j_fit = stats::linear_fit(&lx, &ly)?;
    Ok(JKCurves { radii, j, k: k_curve, j_fit, samples_per_radius: samples })
}

/// The concave comparison function of the certificate, `c·r^p`. Named
/// apart from the diffusion coefficient on purpose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaConc {
    pub c: f64,
    pub p: f64,
}

impl SigmaConc {
    pub fn value(&self, r: f64) -> f64 {
        self.c * r.powf(self.p)
    }
}

/// How to choose the comparison function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConcChoice {
    /// Exponent `1−α` when α < 1, else `β/2` (an ε̃ = 1 − β/2 ∈ (1−β, 1)),
    /// with the largest constant the J curve allows.
    Auto,
    /// Exponent fixed, constant from the J curve.
    Exponent(f64),
    Fixed(SigmaConc),
}

#[derive(Clone, Copy, Debug)]
pub struct CertOptions {
    pub radii_lo: f64,
    pub n_radii: usize,
    pub samples: usize,
    /// Pairs used for the sampled supremum `A₁`.
    pub a1_pairs: usize,
    pub quad: QuadOptions,
}

impl Default for CertOptions {
    fn default() -> Self {
        CertOptions { radii_lo: 1e-3, n_radii: 8, samples: 4, a1_pairs: 24, quad: QuadOptions::default().with_rel_tol(1e-7) }
    }
}

#[derive(Clone, Debug)]
pub struct RateCertificate {
    pub curves: JKCurves,
    pub a1: f64,
    /// Distance range of the pairs behind the sampled `A₁`.
    pub a1_range: (f64, f64),
    pub a2: f64,
    /// `L_σ(A₁ + A₂)`, absorbed into the dissipativity constants.
    pub perturbation: f64,
    pub k2_eff: f64,
    pub profile: DissipativityProfile,
    pub sigma_conc: SigmaConc,
    /// Smallest ratio `J(κ∧r)(κ∧r)²/(2r) / σ_conc(r)` on the sampled grid.
    pub conc_margin: f64,
    pub kappa: f64,
    pub g1_end: f64,
    pub g2_end: f64,
    pub g_end: f64,
    pub c1: f64,
    pub c2: f64,
    pub lambda: f64,
    pub big_c: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CertificateOutputs {
    pub c2: f64,
    pub g_end: f64,
    pub c1: f64,
    pub lambda: f64,
    pub big_c: f64,
}

/// `c₂ = 2K₂ ∧ g₁(2l₀)⁻¹`, `g = g₁ + (2/c₂)g₂`, `c₁ = e^{−c₂g(2l₀)}`, then λ
/// and C. A zero `g₁(2l₀)` means an empty range (l₀ = 0).
pub fn certificate_outputs(k2: f64, g1_end: f64, g2_end: f64) -> CertificateOutputs {
    let c2 = if g1_end > 0.0 { (2.0 * k2).min(1.0 / g1_end) } else { 2.0 * k2 };
    let g_end = g1_end + 2.0 / c2 * g2_end;
    let c1 = (-c2 * g_end).exp();
    CertificateOutputs { c2, g_end, c1, lambda: lambda_from(c2, g_end), big_c: (1.0 + c1) / (2.0 * c1) }
}

/// `λ = c₂/(1 + e^{c₂g(2l₀)})`.
pub fn lambda_from(c2: f64, g_end: f64) -> f64 {
    c2 / (1.0 + (c2 * g_end).exp())
}

/// `∫₀^r h(s) ds` for `h` with a power-type singularity at 0, integrated in
/// `ln s` with the tail below `s₀` closed by the local power law.
fn integrate_from_zero<H: Fn(f64) -> f64>(h: H, r: f64, tol: f64) -> Result<f64> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let s0 = r * 1e-14;
    let est = quadrature::integrate(
        |u| {
            let s = u.exp();
            h(s) * s
        },
        s0.ln(),
        r.ln(),
        &[],
        tol,
        0.0,
        2000,
    );
    if !est.converged {
        return Err(Error::Quadrature { value: est.value, residual: est.error, context: "certificate integral".into() });
    }
    let e = 1.0 + (h(2.0 * s0) / h(s0)).ln() / 2f64.ln();
    if !(e > 0.0) || !est.value.is_finite() {
        return Err(Error::CertificateUnavailable("integrand is not integrable at 0".into()));
    }
    Ok(est.value + h(s0) * s0 / e)
}

impl RateCertificate {
    /// `Φ₁(r) = K₁r^β + K₂r/2`.
    pub fn phi1(&self, r: f64) -> f64 {
        self.profile.k1 * r.powf(self.profile.beta) + self.profile.k2 * r / 2.0
    }

    pub fn g1(&self, r: f64) -> Result<f64> {
        let sc = self.sigma_conc;
        integrate_from_zero(|s| 1.0 / sc.value(s), r, 1e-11)
    }

    pub fn g2(&self, r: f64) -> Result<f64> {
        let sc = self.sigma_conc;
        integrate_from_zero(|s| self.phi1(s) / (s * sc.value(s)), r, 1e-11)
    }

    /// `g = g₁ + (2/c₂)g₂`.
    pub fn g(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Ok(0.0);
        }
        Ok(self.g1(r)? + 2.0 / self.c2 * self.g2(r)?)
    }

    pub fn two_l0(&self) -> f64 {
        2.0 * self.profile.l0
    }

    pub fn psi(&self, r: f64) -> Result<f64> {
        let end = self.two_l0();
        if r <= end {
            let est = quadrature::integrate(|s| (-self.c2 * self.g(s).unwrap_or(f64::INFINITY)).exp(), 0.0, r, &[], 1e-10, 0.0, 400);
            Ok(self.c1 * r + est.value)
        } else {
            Ok(self.psi(end)? + self.psi_d1(end)? * (r - end))
        }
    }

    /// `ψ′(r) = c₁ + e^{−c₂g(r)}` on `[0, 2l₀]`, constant beyond.
    pub fn psi_d1(&self, r: f64) -> Result<f64> {
        let r = r.min(self.two_l0());
        Ok(self.c1 + (-self.c2 * self.g(r)?).exp())
    }
}

/// Sampled `A₁ = sup(Λμ_Ψ(ℝ^d)(|x−y|∧κ) + (1+Λ²/2)∫|z|(μ_Ψ+μ_{Ψ⁻¹}))`.
fn sampled_a1(k: &CouplingKernel, lo: f64, hi: f64, n: usize, opts: &QuadOptions) -> Result<f64> {
    let dim = k.dim();
    let lam = k.coeff().lambda_hs();
    let pairs = crate::grid::log_spaced_pairs(dim, n, lo, hi, -5.0, 5.0);
    let vals: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|(x, y)| {
            let pm = k.pair(x, y)?;
            let r = pm.distance();
            let mass = pm.mu_mass(opts)?.value;
            let fa = pm.mu_first_moment(Branch::Coalesce, f64::INFINITY, opts)?.value;
            let fb = pm.mu_first_moment(Branch::Reflect, f64::INFINITY, opts)?.value;
            Ok(lam * mass * r.min(k.kappa()) + (1.0 + lam * lam / 2.0) * (fa + fb))
        })
        .collect();
    Ok(vals?.into_iter().fold(0.0, f64::max))
}

/// Assembles the contraction certificate `(ψ, λ, C)`.
pub fn contraction_certificate(
    k: &CouplingKernel,
    prof: &DissipativityProfile,
    conc: ConcChoice,
    opts: &CertOptions,
) -> Result<RateCertificate> {
    prof.validate()?;
    let kappa = k.kappa();
    let cf = k.coeff();
    let qo = &opts.quad;
    let mut radii = log_space(opts.radii_lo * kappa, kappa, opts.n_radii);
    *radii.last_mut().unwrap() = kappa;
    let curves = estimate_j_k(k, &radii, opts.samples, qo)?;
    if !(curves.j[0] > 0.0) {
        return Err(Error::CertificateUnavailable("J vanishes on the sampled radii".into()));
    }

    let moments = k.driving().moment_integrals(qo)?;
    if !moments.big_first_finite {
        return Err(Error::CertificateUnavailable("the first moment of big jumps is infinite".into()));
    }
    let a2 = moments.big_first + cf.lip_sigma() / 2.0 * moments.small_square;
    let a1_range = (radii[0], 2.0 * kappa);
    let a1 = sampled_a1(k, a1_range.0, a1_range.1, opts.a1_pairs, qo)?;
    let perturbation = cf.lip_sigma() * (a1 + a2);
    if perturbation > prof.k2 / 2.0 {
        return Err(Error::CertificateUnavailable(format!("L_sigma(A1+A2)={perturbation:.4e} exceeds K2/2={:.4e}", prof.k2 / 2.0)));
    }
    let k2_eff = prof.k2 - perturbation;

    let alpha0 = k.levy().alpha();
    let p = match conc {
        ConcChoice::Fixed(s) => s.p,
        ConcChoice::Exponent(p) => p,
        ConcChoice::Auto if alpha0 < 1.0 => 1.0 - alpha0,
        ConcChoice::Auto => prof.beta / 2.0,
    };
    let end = 2.0 * prof.l0;
    // the comparison function only matters on (0, 2l₀]
    let rhs = |r: f64, j: f64| {
        let rk = r.min(kappa);
        j * rk * rk / (2.0 * r)
    };
    let check_grid: Vec<f64> = if end > 0.0 { log_space(radii[0].min(end), end, 200) } else { Vec::new() };
    let sigma_conc = match conc {
        ConcChoice::Fixed(s) => s,
        _ => {
            let mut c = f64::INFINITY;
            for &r in &check_grid {
                let j = if r.min(kappa) < radii[0] { curves.j_power(r.min(kappa)) } else { curves.j_lower(r.min(kappa)).unwrap() };
                c = c.min(rhs(r, j) / r.powf(p));
            }
            SigmaConc { c: if c.is_finite() { 0.999 * c } else { 1.0 }, p }
        }
    };
    if !(sigma_conc.c > 0.0) || !(0.0..1.0).contains(&sigma_conc.p) {
        return Err(Error::CertificateUnavailable(format!(
            "comparison function c={} p={} is not positive, concave and nondecreasing",
            sigma_conc.c, sigma_conc.p
        )));
    }
    let mut conc_margin = f64::INFINITY;
    for &r in check_grid.iter().filter(|&&r| r.min(kappa) >= radii[0]) {
        conc_margin = conc_margin.min(rhs(r, curves.j_lower(r.min(kappa)).unwrap()) / sigma_conc.value(r));
    }

    let mut cert = RateCertificate {
        curves,
        a1,
        a1_range,
        a2,
        perturbation,
        k2_eff,
        profile: *prof,
        sigma_conc,
        conc_margin,
        kappa,
        g1_end: 0.0,
        g2_end: 0.0,
        g_end: 0.0,
        c1: 1.0,
        c2: 2.0 * k2_eff,
        lambda: 0.0,
        big_c: 1.0,
    };
    if end > 0.0 {
        if prof.beta <= sigma_conc.p {
            return Err(Error::CertificateUnavailable(format!(
                "g2 diverges: beta={} does not exceed the comparison exponent {}",
                prof.beta, sigma_conc.p
            )));
        }
        cert.g1_end = cert.g1(end).map_err(|e| Error::CertificateUnavailable(format!("g1 diverges: {e}")))?;
        cert.g2_end = cert.g2(end).map_err(|e| Error::CertificateUnavailable(format!("g2 diverges: {e}")))?;
    }
    // l₀ = 0 is the purely dissipative limit: g ≡ 0, c₁ = 1, ψ(r) = 2r.
    let out = certificate_outputs(k2_eff, cert.g1_end, cert.g2_end);
    (cert.c2, cert.g_end, cert.c1, cert.lambda, cert.big_c) = (out.c2, out.g_end, out.c1, out.lambda, out.big_c);
    if !(cert.lambda > 0.0) {
        return Err(Error::CertificateUnavailable(format!("rate underflows: c2={} g(2l0)={}", cert.c2, cert.g_end)));
    }
    Ok(cert)
}

/// `ψ(r) = r(1 − log^{−θ}(1/r))` for α > 1 and `ψ(r) = r^θ` for α ≤ 1, with
/// the sampled J curve plugged into `λ_ψ(ε) = −sup_{r≤ε} J(r)r²ψ″(2r)`.
pub struct GradientCertificate {
    pub alpha: f64,
    pub theta: f64,
    pub psi: Box<dyn RadialFn>,
    /// `J(r) ≈ a·r^s`.
    pub j_coef: f64,
    pub j_exp: f64,
    /// Largest ε for which ψ has its small-r form on `(0, 2ε]`.
    pub eps_max: f64,
}

pub fn gradient_rate_certificate(levy: &LevyModel, theta: f64, alpha: f64, curves: &JKCurves) -> Result<GradientCertificate> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(invalid(format!("alpha={alpha} must lie in (0,2)")));
    }
    if (alpha - levy.alpha()).abs() > 1e-12 && levy.envelope().is_none() {
        return Err(invalid(format!("alpha={alpha} does not match the model's {}", levy.alpha())));
    }
    let (psi, eps_max): (Box<dyn RadialFn>, f64) = if alpha > 1.0 {
        if !(theta > 0.0) {
            return Err(invalid(format!("theta={theta} must be positive for alpha in (1,2)")));
        }
        let f = LogCorrected::with_default_cutoff(theta)?;
        let rc = f.cutoff();
        (Box::new(f), rc / 2.0)
    } else {
        if !(theta > 0.0 && theta < alpha) {
            return Err(invalid(format!("theta={theta} must lie in (0, alpha={alpha})")));
        }
        (Box::new(PowerCapped::new(theta, 2.0)?), 1.0)
    };
    Ok(GradientCertificate { alpha, theta, psi, j_coef: curves.j_fit.intercept.exp(), j_exp: curves.j_fit.slope, eps_max })
}

impl GradientCertificate {
    fn j(&self, r: f64) -> f64 {
        self.j_coef * r.powf(self.j_exp)
    }

    /// Supremum over a log grid of `(0, ε]` (240 points per decade down to
    /// 1e-14·ε).
    pub fn lambda_psi(&self, eps: f64) -> f64 {
        let n = 240 * 14;
        let mut sup = f64::NEG_INFINITY;
        for i in 0..=n {
            let r = eps * 10f64.powf(-14.0 * i as f64 / n as f64);
            sup = sup.max(self.j(r) * r * r * self.psi.d2(2.0 * r));
        }
        -sup
    }

    /// `C‖f‖∞ inf_ε [1/ψ(ε) + 1/(tλ_ψ(ε))]` with ε over a log grid.
    pub fn envelope(&self, t: f64, f_sup: f64, c: f64) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=600 {
            let eps = self.eps_max * 10f64.powf(-12.0 * i as f64 / 600.0);
            let lam = self.lambda_psi(eps);
            if lam > 0.0 {
                best = best.min(1.0 / self.psi.value(eps) + 1.0 / (t * lam));
            }
        }
        c * f_sup * best
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayFit {
    /// Positive for decay.
    pub rate: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Least squares of `log v` against `t` over the window.
pub fn fit_decay(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t >= window.0 && t <= window.1 {
            if !(v > 0.0) {
                return Err(Error::Fit(format!("value {v} at t={t} is not positive")));
            }
            x.push(t);
            y.push(v.ln());
        }
    }
    if x.len() < 3 {
        return Err(Error::Fit(format!("only {} points in window [{}, {}]", x.len(), window.0, window.1)));
    }
    let f = stats::linear_fit(&x, &y)?;
    Ok(DecayFit { rate: -f.slope, intercept: f.intercept, r2: f.r2, n: f.n })
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub curve: SurvivalCurve,
    pub w1_upper: Vec<f64>,
    pub w1_band: Vec<(f64, f64)>,
    pub tv_upper: Vec<f64>,
    pub tv_band: Vec<(f64, f64)>,
    /// Sorted-sample W₁ between the X and Y marginals, d = 1 only.
    pub w1_exact: Option<Vec<f64>>,
    pub fit_w1: Option<DecayFit>,
    pub fit_tv: Option<DecayFit>,
}

/// W₁ and TV upper bounds from the coupling, `E|X_t−Y_t|` and `2P(T>t)`,
/// with exponential fits on `window`. Fits are `None` when too few
/// positive points fall inside the window.
pub fn tv_and_w1_report(
    k: &CouplingKernel,
    x0: &Vector,
    y0: &Vector,
    sim: &SimConfig,
    grid: &[f64],
    window: (f64, f64),
) -> Result<DecayReport> {
    let curve = coupling_time_ensemble(k, x0, y0, sim, grid)?;
    let w1_upper = curve.mean_dist.clone();
    let w1_band = curve.mean_dist.iter().zip(&curve.mean_dist_se).map(|(m, s)| (m - 1.96 * s, m + 1.96 * s)).collect();
    let tv_upper: Vec<f64> = curve.survival.iter().map(|s| 2.0 * s).collect();
    let tv_band = curve.ci_lo.iter().zip(&curve.ci_hi).map(|(l, h)| (2.0 * l, 2.0 * h)).collect();
    let w1_exact = if x0.dim() == 1 {
        // Re-simulate on the same seeds to get the marginal samples per time.
        let s = Simulator::coupled(k, sim)?;
        let rec = Recording::Grid(curve.times.clone());
        let paths: Result<Vec<_>> = (0..sim.n_paths as u64).into_par_iter().map(|p| s.coupled_path(x0, y0, p, &rec, false)).collect();
        let paths = paths?;
        Some(
            (0..curve.times.len())
                .map(|j| {
                    let xs: Vec<f64> = paths.iter().map(|p| p.x_states[j][0]).collect();
                    let ys: Vec<f64> = paths.iter().map(|p| p.y_states[j][0]).collect();
                    stats::wasserstein1_1d(&xs, &ys)
                })
                .collect(),
        )
    } else {
        None
    };
    let positive_fit = |vals: &[f64]| {
        let (t, v): (Vec<f64>, Vec<f64>) = curve.times.iter().zip(vals).filter(|(_, &v)| v > 0.0).map(|(&t, &v)| (t, v)).unzip();
        fit_decay(&t, &v, window).ok()
    };
    let fit_w1 = positive_fit(&w1_upper);
    let fit_tv = positive_fit(&tv_upper);
    Ok(DecayReport { curve, w1_upper, w1_band, tv_upper, tv_band, w1_exact, fit_w1, fit_tv })
}

#[derive(Clone, Debug)]
pub struct LyapunovReport {
    pub radii: Vec<f64>,
    pub f_values: Vec<f64>,
    pub lf_values: Vec<f64>,
    pub c4: f64,
    pub c5: f64,
    pub passed: bool,
}

/// Evaluates `Lf` for `f(x) = scale·√(1+|x|²)` along a few directions at
/// each radius and reads off `Lf ≤ −c₄f + c₅`: c₄ is the smallest `−Lf/f`
/// over the outer half of the radii `≥ 2`, and c₅ then makes the bound hold
/// at every sampled point.
pub fn lyapunov_check(cf: &CoefficientField, levy: &LevyModel, radii: &[f64], scale: f64, opts: &QuadOptions) -> Result<LyapunovReport> {
    if !levy.driving().moment_integrals(opts)?.big_first_finite {
        return Err(Error::Precondition("Lyapunov check needs a finite first moment of big jumps".into()));
    }
    if radii.iter().filter(|&&r| r >= 2.0).count() < 2 {
        return Err(Error::Precondition("Lyapunov check needs at least two radii >= 2".into()));
    }
    let f: SharedFn = std::sync::Arc::new(SmoothNorm);
    let f = Scaled(f, scale);
    let dim = cf.dim();
    let dirs = if dim == 1 { 2 } else { 4 };
    let mut pts = Vec::new();
    for &r in radii {
        for i in 0..dirs {
            pts.push((r, direction(dim, i).scale(r)));
        }
    }
    let lf: Result<Vec<f64>> = pts.par_iter().map(|(_, x)| Ok(generator_l(cf, levy, &f, x, opts)?.value)).collect();
    let lf = lf?;
    let fv: Vec<f64> = pts.iter().map(|(_, x)| f.value(x)).collect();
    // worst case per radius, then secants between consecutive radii
    let mut per_r: Vec<(f64, f64, f64)> = Vec::new();
    for (i, &r) in radii.iter().enumerate() {
        let sl = &lf[i * dirs..(i + 1) * dirs];
        per_r.push((r, fv[i * dirs], sl.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
    }
    let far: Vec<&(f64, f64, f64)> = per_r.iter().filter(|p| p.0 >= 2.0).collect();
    let outer = &far[far.len() / 2..];
    let c4 = outer.iter().map(|p| -p.2 / p.1).fold(f64::INFINITY, f64::min);
    let c5 = lf.iter().zip(&fv).map(|(l, v)| l + c4 * v).fold(f64::NEG_INFINITY, f64::max);
    Ok(LyapunovReport {
        radii: radii.to_vec(),
        f_values: per_r.iter().map(|p| p.1).collect(),
        lf_values: per_r.iter().map(|p| p.2).collect(),
        c4,
        c5,
        passed: c4 > 0.0,
    })
}

#[derive(Clone, Debug)]
pub struct InvariantProbe {
    pub starts: Vec<Vector>,
    pub horizon: f64,
    /// Energy tests between the first start and each other start.
    pub tests: Vec<PermutationTest>,
    /// d = 1: W₁ between the pooled laws at `t` and `2t`, for the listed `t`.
    pub cauchy_times: Vec<f64>,
    pub cauchy_w1: Vec<f64>,
    pub passed: bool,
}

/// Independent paths from each start (disjoint path indices), compared at
/// the horizon; the laws agree when every energy statistic is inside its
/// 95% permutation band.
pub fn invariant_measure_probe(
    cf: &CoefficientField,
    levy: &LevyModel,
    starts: &[Vector],
    sim: &SimConfig,
    cauchy_times: &[f64],
) -> Result<InvariantProbe> {
    if starts.len() < 2 {
        return Err(Error::Precondition("invariant_measure_probe needs at least two starts".into()));
    }
    let s = Simulator::marginal(cf, levy, sim)?;
    let mut grid: Vec<f64> = cauchy_times.iter().flat_map(|&t| [t, 2.0 * t]).filter(|&t| t > 0.0 && t < sim.horizon).collect();
    grid.push(sim.horizon);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let rec = Recording::Grid(grid.clone());
    let n = sim.n_paths as u64;
    let mut samples: Vec<Vec<Vec<Vector>>> = Vec::new();
    for (si, x0) in starts.iter().enumerate() {
        let paths: Result<Vec<_>> = (0..n).into_par_iter().map(|p| s.marginal_path(x0, si as u64 * n + p, &rec)).collect();
        let paths = paths?;
        // samples[start][grid index] over paths, skipping the t=0 entry
        samples.push((0..grid.len()).map(|j| paths.iter().map(|p| p.states[j + 1]).collect()).collect());
    }
    let last = grid.len() - 1;
    let m = if starts[0].dim() == 1 { sim.n_paths } else { sim.n_paths.min(1500) };
    let tests: Result<Vec<PermutationTest>> = (1..starts.len())
        .map(|i| stats::energy_test(&samples[0][last][..m], &samples[i][last][..m], 200, sim.seed ^ (0xabc + i as u64)))
        .collect();
    let tests = tests?;
    let mut c_times = Vec::new();
    let mut c_w1 = Vec::new();
    if starts[0].dim() == 1 {
        for &t in cauchy_times {
            let (Some(a), Some(b)) = (grid.iter().position(|&g| g == t), grid.iter().position(|&g| g == 2.0 * t)) else {
                continue;
            };
            let pool = |j: usize| samples.iter().flat_map(|s| s[j].iter().map(|v| v[0])).collect::<Vec<f64>>();
            c_times.push(t);
            c_w1.push(stats::wasserstein1_1d(&pool(a), &pool(b)));
        }
    }
    let passed = tests.iter().all(|t| t.within_95());
    Ok(InvariantProbe { starts: starts.to_vec(), horizon: sim.horizon, tests, cauchy_times: c_times, cauchy_w1: c_w1, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient_field::{Diffusion, Drift};
    use crate::levy_model::SupportVariant;

    fn additive(alpha: f64, drift: Drift, kappa: f64) -> CouplingKernel {
        let levy = LevyModel::new(1, alpha, 1.0, 1.0, SupportVariant::Ball).unwrap();
        CouplingKernel::new(levy, CoefficientField::additive(1, drift, 1.0).unwrap(), kappa).unwrap()
    }

    #[test]
    fn decay_fit_examples() {
        let t: Vec<f64> = (0..=20).map(|i| i as f64 * 0.5).collect();
        let exact: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        let f = fit_decay(&t, &exact, (0.0, 10.0)).unwrap();
        assert!((f.rate - 2.0).abs() < 1e-12 && (f.r2 - 1.0).abs() < 1e-12);
        // deterministic ±1% wiggle
        let noisy: Vec<f64> = t.iter().enumerate().map(|(i, t)| 5.0 * (-0.3 * t).exp() * (1.0 + 0.01 * (i as f64 * 2.7).sin())).collect();
        let f = fit_decay(&t, &noisy, (0.0, 10.0)).unwrap();
        assert!((0.25..=0.35).contains(&f.rate));
        let flat = vec![3.0; t.len()];
        assert_eq!(fit_decay(&t, &flat, (0.0, 10.0)).unwrap().rate, 0.0);
        assert!(matches!(fit_decay(&t, &flat, (0.1, 0.9)), Err(Error::Fit(_))));
    }

    #[test]
    fn additive_j_is_pair_independent_with_exponent_minus_alpha() {
        let k = additive(0.5, Drift::Zero, 1.0);
        let radii = [0.1, 0.05, 0.025, 0.0125];
        let c = estimate_j_k(&k, &radii, 3, &QuadOptions::default().with_rel_tol(1e-8)).unwrap();
        assert!((c.exponent() + 0.5).abs() <= 0.15, "{}", c.exponent());
        // one sample already gives the same J at each radius
        let one = estimate_j_k(&k, &radii, 1, &QuadOptions::default().with_rel_tol(1e-8)).unwrap();
        for (a, b) in c.j.iter().zip(&one.j) {
            assert!((a / b - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_l0_is_pure_dissipativity() {
        let k = additive(0.5, Drift::Linear { rate: 1.0 }, 1.0);
        let prof = DissipativityProfile { k1: 0.0, k2: 1.0, l0: 0.0, beta: 1.0 };
        let c = contraction_certificate(&k, &prof, ConcChoice::Auto, &CertOptions::default()).unwrap();
        assert_eq!((c.c1, c.c2, c.lambda, c.big_c), (1.0, 2.0, 1.0, 1.0));
        assert!((c.psi(0.7).unwrap() - 1.4).abs() < 1e-12);
    }

    #[test]
    fn certificate_integrals_and_psi_shape() {
        let k = additive(0.5, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, 1.0);
        let prof = DissipativityProfile { k1: 2.0, k2: 0.5, l0: 1.0, beta: 1.0 };
        let c = contraction_certificate(&k, &prof, ConcChoice::Auto, &CertOptions::default()).unwrap();
        let (sc, end) = (c.sigma_conc, 2.0f64);
        // closed forms for σ = c·r^p and Φ₁(r) = K₁r + K₂r/2
        let g1 = end.powf(1.0 - sc.p) / (sc.c * (1.0 - sc.p));
        let g2 = (prof.k1 + prof.k2 / 2.0) * end.powf(1.0 - sc.p) / (sc.c * (1.0 - sc.p));
        assert!((c.g1_end / g1 - 1.0).abs() < 1e-6);
        assert!((c.g2_end / g2 - 1.0).abs() < 1e-6);
        assert_eq!(c.lambda, lambda_from(c.c2, c.g_end));
        assert!(c.lambda > 0.0 && c.big_c.is_finite() && c.conc_margin >= 1.0);
        assert_eq!(sc.p, 0.5);
        // ψ′ at both ends by finite differences, and concavity
        let h = 1e-10;
        let d0 = (c.psi(2.0 * h).unwrap() - c.psi(h).unwrap()) / h;
        assert!((d0 - (1.0 + c.c1)).abs() < 1e-2, "{d0}");
        let h = 1e-5;
        let de = (c.psi(end).unwrap() - c.psi(end - h).unwrap()) / h;
        assert!((de - (c.c1 + (-c.c2 * c.g_end).exp())).abs() < 1e-6);
        let pts = log_space(1e-3, 10.0, 30);
        let vals: Vec<f64> = pts.iter().map(|&r| c.psi(r).unwrap()).collect();
        for i in 1..pts.len() {
            assert!(vals[i] >= vals[i - 1] * (1.0 - 1e-10));
        }
        for r in [0.01, 0.5, 3.0, 7.5] {
            assert!(c.psi(r).unwrap() / r >= c.c1 && c.psi(r).unwrap() / r <= 1.0 + c.c1 + 1e-9);
        }
    }

    #[test]
    fn lambda_nondecreasing_in_k2_for_fixed_integrals() {
        for (g1, g2) in [(0.5, 0.1), (9.67, 21.7), (154.7, 348.0)] {
            let mut last = 0.0;
            for k2 in [0.01, 0.05, 0.1, 0.5, 1.0, 10.0] {
                let o = certificate_outputs(k2, g1, g2);
                assert!(o.lambda >= last, "g1={g1} k2={k2}");
                last = o.lambda;
            }
        }
    }

    #[test]
    fn sin_preset_baseline() {
        let k = additive(0.5, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, 1.0);
        let prof = Drift::SinPerturbed { rate: 1.0, amp: 1.0 }.default_profile(1).unwrap();
        assert_eq!((prof.k1, prof.k2, prof.l0, prof.beta), (2.0, 0.5, 4.0, 1.0));
        let c = contraction_certificate(&k, &prof, ConcChoice::Auto, &CertOptions::default()).unwrap();
        assert!((c.g1_end / 154.66433233353712 - 1.0).abs() < 1e-6);
        assert!((c.g2_end / 347.99474775045843 - 1.0).abs() < 1e-6);
        assert!((c.lambda / 1.293951469977338e-305 - 1.0).abs() < 1e-3);
        assert!(c.lambda > 0.0 && c.big_c.is_finite());
    }

    #[test]
    fn rougher_drift_never_raises_lambda() {
        let k = additive(0.5, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, 1.0);
        let opts = CertOptions::default();
        let lam = |k1: f64, l0: f64| {
            let prof = DissipativityProfile { k1, k2: 0.5, l0, beta: 1.0 };
            contraction_certificate(&k, &prof, ConcChoice::Auto, &opts).unwrap().lambda
        };
        let mut last = f64::INFINITY;
        for k1 in [0.5, 1.0, 2.0, 4.0] {
            let l = lam(k1, 1.0);
            assert!(l <= last && l > 0.0);
            last = l;
        }
        assert!(lam(2.0, 2.0) <= lam(2.0, 1.0));
    }

    #[test]
    fn divergent_g2_is_reported() {
        let k = additive(0.5, Drift::Zero, 1.0);
        let prof = DissipativityProfile { k1: 1.0, k2: 0.5, l0: 1.0, beta: 0.3 };
        let err = contraction_certificate(&k, &prof, ConcChoice::Auto, &CertOptions::default()).unwrap_err();
        assert!(matches!(err, Error::CertificateUnavailable(ref m) if m.contains("g2")), "{err}");
    }

    #[test]
    fn power_lambda_psi_closed_form() {
        let k = additive(0.5, Drift::Zero, 1.0);
        let c = estimate_j_k(&k, &[0.1, 0.05, 0.025, 0.0125], 1, &QuadOptions::default()).unwrap();
        let g = gradient_rate_certificate(k.levy(), 0.25, 0.5, &c).unwrap();
        let (a, s, th) = (g.j_coef, g.j_exp, 0.25);
        for eps in [0.3f64, 0.05, 1e-3] {
            // a r^s r² θ(θ−1)(2r)^{θ−2} is increasing towards 0 in magnitude, so the sup sits at r = ε
            let want = a * th * (1.0 - th) * 2f64.powf(th - 2.0) * eps.powf(th + s);
            assert!((g.lambda_psi(eps) / want - 1.0).abs() < 1e-9);
        }
        // with J = a·r^s the envelope scales as t^{θ/s}
        let ratio = |t: f64| g.envelope(t, 1.0, 1.0) * t.powf(th / -s);
        let (lo, hi) = (ratio(1e-4), ratio(1e-2));
        assert!((lo / hi - 1.0).abs() < 0.05, "{lo} {hi}");
        assert!(gradient_rate_certificate(k.levy(), 0.6, 0.5, &c).is_err());
    }

    #[test]
    fn lyapunov_examples() {
        let levy = LevyModel::new(1, 1.2, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let opts = QuadOptions::default();
        let radii = [0.0, 1.0, 2.0, 4.0, 8.0, 16.0];
        let cf = CoefficientField::additive(1, Drift::Linear { rate: 1.0 }, 1.0).unwrap();
        let r = lyapunov_check(&cf, &levy, &radii, 1.0, &opts).unwrap();
        assert!(r.passed && r.c4 >= 0.5, "{r:?}");
        let r2 = lyapunov_check(&cf, &levy, &radii, 2.0, &opts).unwrap();
        assert!((r2.c4 - r.c4).abs() < 1e-9 && (r2.c5 - 2.0 * r.c5).abs() < 1e-9);
        let flat = CoefficientField::additive(1, Drift::Zero, 1.0).unwrap();
        assert!(!lyapunov_check(&flat, &levy, &radii, 1.0, &opts).unwrap().passed);
        let cf2 = CoefficientField::new(1, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 1.0 }).unwrap();
        assert!(lyapunov_check(&cf2, &levy, &radii, 1.0, &opts).unwrap().passed);
    }
}
