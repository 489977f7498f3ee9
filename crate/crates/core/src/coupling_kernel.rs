//! The refined basic coupling map `Ψ(z) = σ(y)⁻¹(σ(x)z + (x−y)_κ)`, the
//! measures `μ_Ψ = ν₀ ∧ (ν₀Ψ)` and `μ_{Ψ⁻¹}`, and the per-jump thinning.

use crate::coefficient_field::CoefficientField;
use crate::error::{invalid, Error, Result};
use crate::levy_model::{LevyModel, SupportVariant};
use crate::linalg::{Matrix, Vector};
use crate::quadrature::{Estimate, QuadOptions};
use std::f64::consts::PI;

/// `(x−y)_κ = (1 ∧ κ/|x−y|)(x−y)`.
pub fn clipped_difference(x: &Vector, y: &Vector, kappa: f64) -> Vector {
    let u = *x - *y;
    let r = u.norm();
    if r <= kappa {
        u
    } else if u.dim() == 1 {
        // ±κ exactly, so additive jumps move the distance by exactly κ.
        Vector::from_slice(&[kappa.copysign(u[0])])
    } else {
        u.scale(kappa / r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Y jumps by `σ(y)Ψ(z)`.
    Coalesce,
    /// Y jumps by `σ(y)Ψ⁻¹(z)`.
    Reflect,
    /// Y jumps by `σ(y)z`.
    Synchronize,
}

impl Branch {
    pub fn name(&self) -> &'static str {
        match self {
            Branch::Coalesce => "coalesce",
            Branch::Reflect => "reflect",
            Branch::Synchronize => "synchronize",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThinningDecision {
    pub branch: Branch,
    /// The increment of Y: `σ(y)` times the chosen image of z.
    pub y_jump: Vector,
}

#[derive(Clone, Debug)]
pub struct CouplingKernel {
    levy: LevyModel,
    coeff: CoefficientField,
    kappa: f64,
}

impl CouplingKernel {
    pub fn new(levy: LevyModel, coeff: CoefficientField, kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(invalid("kappa must be positive"));
        }
        if levy.dim() != coeff.dim() {
            return Err(invalid("Levy model and coefficients disagree on the dimension"));
        }
        Ok(CouplingKernel { levy, coeff, kappa })
    }

    /// The measure μ_Ψ is built from (ν₀ when an envelope is set).
    pub fn levy(&self) -> &LevyModel {
        &self.levy
    }

    /// The measure driving the noise.
    pub fn driving(&self) -> &LevyModel {
        self.levy.driving()
    }

    pub fn coeff(&self) -> &CoefficientField {
        &self.coeff
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn dim(&self) -> usize {
        self.levy.dim()
    }

    pub fn pair(&self, x: &Vector, y: &Vector) -> Result<PairMap<'_>> {
        PairMap::new(self, x, y)
    }
}

/// Ψ and Ψ⁻¹ for a fixed pair `(x, y)`, kept as affine maps
/// `Ψ(z) = Mz + v`, `Ψ⁻¹(z) = M⁻¹z − w` with `w = σ(x)⁻¹(x−y)_κ`.
#[derive(Clone, Debug)]
pub struct PairMap<'a> {
    kernel: &'a CouplingKernel,
    pub x: Vector,
    pub y: Vector,
    pub sigma_x: Matrix,
    pub sigma_y: Matrix,
    pub sigma_x_inv: Matrix,
    pub sigma_y_inv: Matrix,
    m: Matrix,
    m_inv: Matrix,
    v: Vector,
    w: Vector,
    /// `|det M|`.
    jac: f64,
    clipped: Vector,
    identity: bool,
}

impl<'a> PairMap<'a> {
    pub fn new(kernel: &'a CouplingKernel, x: &Vector, y: &Vector) -> Result<Self> {
        let cf = &kernel.coeff;
        let sigma_x = cf.sigma(x);
        let sigma_y = cf.sigma(y);
        let sigma_x_inv = cf.sigma_inv(x)?;
        let sigma_y_inv = cf.sigma_inv(y)?;
        let d = x.dim();
        let identity = x == y;
        let clipped = clipped_difference(x, y, kernel.kappa);
        let (m, m_inv, v, w, jac) = if identity {
            (Matrix::identity(d), Matrix::identity(d), Vector::zeros(d), Vector::zeros(d), 1.0)
        } else if cf.is_additive() {
            // σ constant: M = I exactly, which keeps coalescence bit-exact.
            let v = sigma_y_inv.mul_vec(&clipped);
            (Matrix::identity(d), Matrix::identity(d), v, v, 1.0)
        } else {
            let m = sigma_y_inv.mul_mat(&sigma_x);
            let m_inv = sigma_x_inv.mul_mat(&sigma_y);
            let v = sigma_y_inv.mul_vec(&clipped);
            let w = sigma_x_inv.mul_vec(&clipped);
            (m, m_inv, v, w, m.det().abs())
        };
        Ok(PairMap { kernel, x: *x, y: *y, sigma_x, sigma_y, sigma_x_inv, sigma_y_inv, m, m_inv, v, w, jac, clipped, identity })
    }

    pub fn kernel(&self) -> &CouplingKernel {
        self.kernel
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `(x−y)_κ`.
    pub fn clipped(&self) -> Vector {
        self.clipped
    }

    pub fn distance(&self) -> f64 {
        (self.x - self.y).norm()
    }

    /// `|det σ(y)⁻¹σ(x)|`.
    pub fn jacobian(&self) -> f64 {
        self.jac
    }

    #[inline]
    pub fn psi(&self, z: &Vector) -> Vector {
        if self.identity {
            return *z;
        }
        self.m.mul_vec(z) + self.v
    }

    #[inline]
    pub fn psi_inverse(&self, z: &Vector) -> Vector {
        if self.identity {
            return *z;
        }
        self.m_inv.mul_vec(z) - self.w
    }

    /// Density of μ_Ψ: `min(q₀(z), q₀(Ψz)|det M|)`.
    #[inline]
    pub fn m_psi(&self, z: &Vector) -> f64 {
        let q0 = &self.kernel.levy;
        let a = q0.q(z);
        if a == 0.0 {
            return 0.0;
        }
        if self.identity {
            return a;
        }
        a.min(q0.q(&self.psi(z)) * self.jac)
    }

    /// Density of μ_{Ψ⁻¹}: `min(q₀(z), q₀(Ψ⁻¹z)|det M⁻¹|)`.
    #[inline]
    pub fn m_psi_inverse(&self, z: &Vector) -> f64 {
        let q0 = &self.kernel.levy;
        let a = q0.q(z);
        if a == 0.0 {
            return 0.0;
        }
        if self.identity {
            return a;
        }
        a.min(q0.q(&self.psi_inverse(z)) / self.jac)
    }

    pub fn m_branch(&self, branch: Branch, z: &Vector) -> f64 {
        match branch {
            Branch::Coalesce => self.m_psi(z),
            Branch::Reflect => self.m_psi_inverse(z),
            Branch::Synchronize => self.kernel.driving().q(z),
        }
    }

    /// `(ρ_Ψ, ρ_{Ψ⁻¹})`, the densities of μ_Ψ and μ_{Ψ⁻¹} against the
    /// driving ν.
    pub fn rho(&self, z: &Vector) -> Result<(f64, f64)> {
        let q = self.kernel.driving().q(z);
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::UndefinedRatio(format!("nu has density {q} at z={:?}", z.as_slice())));
        }
        if self.identity {
            return Ok((1.0, 1.0));
        }
        let clamp = |v: f64| v.clamp(0.0, 1.0);
        Ok((clamp(self.m_psi(z) / q), clamp(self.m_psi_inverse(z) / q)))
    }

    /// Pick the branch for jump `z` from a uniform `u ∈ [0,1)`.
    pub fn decide(&self, z: &Vector, u: f64) -> Result<ThinningDecision> {
        let (rp, ri) = self.rho(z)?;
        let (branch, image) = if u <= 0.5 * rp {
            (Branch::Coalesce, self.psi(z))
        } else if u <= 0.5 * (rp + ri) {
            (Branch::Reflect, self.psi_inverse(z))
        } else {
            (Branch::Synchronize, *z)
        };
        Ok(ThinningDecision { branch, y_jump: self.sigma_y.mul_vec(&image) })
    }

    /// Radii where the μ densities or the compensator indicators are
    /// non-smooth, used as quadrature breakpoints.
    pub fn special_radii(&self) -> Vec<f64> {
        if self.identity {
            return Vec::new();
        }
        let levy = &self.kernel.levy;
        let eta = levy.eta();
        let mut out = Vec::new();
        let z_star = self.psi_inverse(&Vector::zeros(self.x.dim()));
        out.push(z_star.norm());
        out.push(self.v.norm());
        if self.x.dim() == 1 {
            let (m, v, w) = (self.m.get(0, 0), self.v[0], self.w[0]);
            for p in [0.0, eta, -eta, 1.0, -1.0] {
                out.push(((p - v) / m).abs());
                out.push((p / m - w).abs());
                out.push((m * p + v).abs());
                out.push((p - w).abs());
            }
            let e = 1.0 + levy.alpha();
            let c = self.jac.powf(1.0 / e);
            let ci = self.jac.powf(-1.0 / e);
            for s in [1.0, -1.0] {
                // |Mz + v| = c|z| and |M⁻¹z − w| = c⁻¹|z|
                let den = m - s * c;
                if den != 0.0 {
                    out.push((v / den).abs());
                }
                let den = 1.0 / m - s * ci;
                if den != 0.0 {
                    out.push((w / den).abs());
                }
            }
        } else {
            let r = z_star.norm();
            out.extend([0.5 * r, (eta - r).abs(), eta + r, (1.0 - r).abs(), 1.0 + r]);
            if self.x.dim() == 2 {
                out.extend(self.tangency_radii());
            }
        }
        out.retain(|r| r.is_finite() && *r > 0.0);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Radii where a circle |z| = r touches one of the curves bounding the
    /// pieces of the μ densities in 2-d: |Ψz| = η, |Ψz| = 1, the switch
    /// |Ψz| = c|z| of the minimum, and the same for Ψ⁻¹. The angular
    /// integrand is smooth in r away from these, so without them the outer
    /// rule can converge to a wrong value with a small error estimate.
    fn tangency_radii(&self) -> Vec<f64> {
        let levy = &self.kernel.levy;
        let eta = levy.eta();
        let e = 2.0 + levy.alpha();
        let mut out = Vec::new();
        let maps = [(self.m, self.v, self.jac.powf(1.0 / e)), (self.m_inv, -self.w, self.jac.powf(-1.0 / e))];
        for (a, shift, c) in maps {
            for (c, level) in [(0.0, eta * eta), (0.0, 1.0), (c, 0.0)] {
                out.extend(curve_radius_extrema(&a, &shift, c, level));
            }
            // lines (Az + shift)₁ = k bound the slab variants
            let row = (a.get(0, 0).powi(2) + a.get(0, 1).powi(2)).sqrt();
            for k in [0.0, eta, -eta] {
                out.push((k - shift[0]).abs() / row);
            }
        }
        out
    }

    /// Polar angles in 2-d where the circle |z| = r crosses a curve bounding
    /// the pieces of the μ densities (see [`Self::tangency_radii`]) or a slab
    /// line of the image. Empty in other dimensions.
    pub fn angular_breaks(&self, r: f64) -> Vec<f64> {
        if self.identity || self.x.dim() != 2 {
            return Vec::new();
        }
        let levy = &self.kernel.levy;
        let eta = levy.eta();
        let e = 2.0 + levy.alpha();
        let mut out = Vec::new();
        let maps = [(self.m, self.v, self.jac.powf(1.0 / e)), (self.m_inv, -self.w, self.jac.powf(-1.0 / e))];
        for (a, shift, c) in maps {
            for (c, level) in [(0.0, eta * eta), (0.0, 1.0), (c, 0.0)] {
                out.extend(circle_crossings(&a, &shift, c, level, r));
            }
            if !matches!(levy.variant(), SupportVariant::HalfSlab | SupportVariant::Slab) {
                continue;
            }
            // r(A₁₁cos φ + A₁₂sin φ) = k − shift₁
            let row = (a.get(0, 0).powi(2) + a.get(0, 1).powi(2)).sqrt();
            let theta = a.get(0, 1).atan2(a.get(0, 0));
            for k in [0.0, eta, -eta] {
                let t = (k - shift[0]) / (r * row);
                if t.abs() <= 1.0 {
                    let d = t.acos();
                    out.extend([wrap_angle(theta + d), wrap_angle(theta - d)]);
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Inner radius below which μ integrals are dropped: the densities are
    /// bounded there, so the omitted mass is O(r_lo^d).
    pub fn mu_inner_radius(&self) -> f64 {
        1e-10 * self.kernel.levy.eta().min(self.distance().max(1e-300))
    }

    /// `∫_{r_lo<|z|<r_hi} g(z) μ(dz)` for `μ = μ_Ψ` or `μ_{Ψ⁻¹}`.
    pub fn mu_integral<G: Fn(&Vector) -> f64>(&self, branch: Branch, g: G, r_lo: f64, r_hi: f64, opts: &QuadOptions) -> Estimate {
        let levy = &self.kernel.levy;
        let lo = r_lo.max(self.mu_inner_radius());
        levy.integrate_over_support_split(
            |z| {
                let m = self.m_branch(branch, z);
                if m == 0.0 {
                    0.0
                } else {
                    m * g(z)
                }
            },
            lo,
            r_hi,
            &self.special_radii(),
            |r| self.angular_breaks(r),
            opts,
        )
    }

    /// `μ_Ψ(ℝ^d)`.
    pub fn mu_mass(&self, opts: &QuadOptions) -> Result<Estimate> {
        self.require_distinct()?;
        self.mu_integral(Branch::Coalesce, |_| 1.0, 0.0, f64::INFINITY, opts).require(opts, 10.0, "mu_mass")
    }

    /// `μ_{Ψ⁻¹}(ℝ^d)`.
    pub fn mu_inverse_mass(&self, opts: &QuadOptions) -> Result<Estimate> {
        self.require_distinct()?;
        self.mu_integral(Branch::Reflect, |_| 1.0, 0.0, f64::INFINITY, opts).require(opts, 10.0, "mu_inverse_mass")
    }

    /// `∫_{|z|≤R} |z| μ(dz)` for the given branch.
    pub fn mu_first_moment(&self, branch: Branch, radius: f64, opts: &QuadOptions) -> Result<Estimate> {
        self.require_distinct()?;
        self.mu_integral(branch, |z| z.norm(), 0.0, radius, opts).require(opts, 10.0, "mu_first_moment")
    }

    fn require_distinct(&self) -> Result<()> {
        if self.identity {
            Err(Error::Precondition("mu integrals need x != y".into()))
        } else {
            Ok(())
        }
    }
}

/// `∫ h(Ψz) μ_Ψ(dz)` against `∫ h(z) μ_{Ψ⁻¹}(dz)`: the worst relative gap
/// over the test functions.
pub fn pushforward_identity_check(pm: &PairMap<'_>, test_fns: &[&(dyn Fn(&Vector) -> f64 + Sync)], opts: &QuadOptions) -> Result<f64> {
    pm.require_distinct()?;
    let mut worst: f64 = 0.0;
    for h in test_fns {
        let lhs = pm.mu_integral(Branch::Coalesce, |z| h(&pm.psi(z)), 0.0, f64::INFINITY, opts);
        let rhs = pm.mu_integral(Branch::Reflect, |z| h(z), 0.0, f64::INFINITY, opts);
        let scale = lhs.value.abs().max(rhs.value.abs()).max(1e-300);
        worst = worst.max((lhs.value - rhs.value).abs() / scale);
    }
    Ok(worst)
}

fn wrap_angle(phi: f64) -> f64 {
    (phi + PI).rem_euclid(2.0 * PI) - PI
}

/// Angles φ where z = r(cos φ, sin φ) solves |Az + a|² = c²|z|² + level.
///
/// In φ this is a trigonometric polynomial of degree 2, so t = tan(φ/2)
/// turns it into a quartic, solved by [`real_poly_roots`].
fn circle_crossings(a: &Matrix, shift: &Vector, c: f64, level: f64, r: f64) -> Vec<f64> {
    let (p11, p12, p22) = {
        let (a11, a12, a21, a22) = (a.get(0, 0), a.get(0, 1), a.get(1, 0), a.get(1, 1));
        (a11 * a11 + a21 * a21, a11 * a12 + a21 * a22, a12 * a12 + a22 * a22)
    };
    let b1 = a.get(0, 0) * shift[0] + a.get(1, 0) * shift[1];
    let b2 = a.get(0, 1) * shift[0] + a.get(1, 1) * shift[1];
    let r2 = r * r;
    // g(φ) = k0 + k1 cos φ + l1 sin φ + k2 cos 2φ + l2 sin 2φ
    let k0 = r2 * 0.5 * (p11 + p22) + shift.norm_sq() - c * c * r2 - level;
    let (k1, l1) = (2.0 * r * b1, 2.0 * r * b2);
    let (k2, l2) = (r2 * 0.5 * (p11 - p22), r2 * p12);
    let scale = k0.abs() + k1.abs() + l1.abs() + k2.abs() + l2.abs();
    if scale == 0.0 {
        return Vec::new();
    }
    // coefficients of t⁴ … t⁰ after multiplying by (1 + t²)²
    let coef = [k0 - k1 + k2, 2.0 * l1 - 4.0 * l2, 2.0 * k0 - 6.0 * k2, 2.0 * l1 + 4.0 * l2, k0 + k1 + k2];
    let mut out = Vec::new();
    // φ = π is t = ∞; a vanishing leading coefficient puts a root there
    if coef[0].abs() <= 1e-12 * scale {
        out.push(PI);
    }
    // near-real pairs mark tangencies; a spare breakpoint there is harmless
    out.extend(real_poly_roots(&coef, scale).into_iter().map(|t| 2.0 * t.atan()));
    out
}

/// Real roots (and near-real pairs, which mark tangencies) of the
/// polynomial with coefficients `coef` from the highest degree down, by
/// Durand–Kerner with a Newton polish.
fn real_poly_roots(coef: &[f64], scale: f64) -> Vec<f64> {
    // drop vanishing leading coefficients
    let first = coef.iter().position(|c| c.abs() > 1e-12 * scale);
    let Some(first) = first else { return Vec::new() };
    let c = &coef[first..];
    let n = c.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = c[0];
    let monic: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let eval = |z: (f64, f64)| {
        let mut acc = (1.0, 0.0);
        for &k in &monic[1..] {
            acc = (acc.0 * z.0 - acc.1 * z.1 + k, acc.0 * z.1 + acc.1 * z.0);
        }
        acc
    };
    let div = |a: (f64, f64), b: (f64, f64)| {
        let den = b.0 * b.0 + b.1 * b.1;
        ((a.0 * b.0 + a.1 * b.1) / den, (a.1 * b.0 - a.0 * b.1) / den)
    };
    // Cauchy bound for the starting circle
    let bound = 1.0 + monic[1..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut z: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let th = 0.4 + 2.0 * PI * k as f64 / n as f64;
            (bound * th.cos(), bound * th.sin())
        })
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let mut den = (1.0, 0.0);
            for j in 0..n {
                if i != j {
                    let d = (z[i].0 - z[j].0, z[i].1 - z[j].1);
                    den = (den.0 * d.0 - den.1 * d.1, den.0 * d.1 + den.1 * d.0);
                }
            }
            if den.0 == 0.0 && den.1 == 0.0 {
                continue;
            }
            let step = div(eval(z[i]), den);
            z[i] = (z[i].0 - step.0, z[i].1 - step.1);
            moved = moved.max(step.0.hypot(step.1) / (1.0 + z[i].0.hypot(z[i].1)));
        }
        if moved < 1e-10 {
            break;
        }
    }
    z.into_iter()
        .filter(|w| w.1.abs() <= 1e-6 * (1.0 + w.0.abs()))
        .map(|w| {
            // two Newton steps on the real polynomial
            let mut t = w.0;
            for _ in 0..2 {
                let (mut p, mut dp) = (monic[0], 0.0);
                for &k in &monic[1..] {
                    dp = dp * t + p;
                    p = p * t + k;
                }
                if dp != 0.0 {
                    let step = p / dp;
                    if step.is_finite() && step.abs() <= 1e-3 * (1.0 + t.abs()) {
                        t -= step;
                    }
                }
            }
            t
        })
        .collect()
}

/// Local extrema of |z| along the 2-d curve |Az + a|² = c²|z|² + level,
/// found on a fine angular grid of ray intersections and refined by
/// ternary search.
fn curve_radius_extrema(a: &Matrix, shift: &Vector, c: f64, level: f64) -> Vec<f64> {
    const N: usize = 2048;
    // the two positive roots along the ray at angle φ, NaN where absent
    let roots = |phi: f64| -> [f64; 2] {
        let u = Vector::from_slice(&[phi.cos(), phi.sin()]);
        let au = a.mul_vec(&u);
        let qa = au.norm_sq() - c * c;
        let qb = 2.0 * au.dot(shift);
        let qc = shift.norm_sq() - level;
        let mut r = [f64::NAN; 2];
        if qa.abs() < 1e-14 {
            if qb != 0.0 && -qc / qb > 0.0 {
                r[0] = -qc / qb;
            }
            return r;
        }
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            return r;
        }
        let sq = disc.sqrt();
        let (r1, r2) = ((-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa));
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let pos: Vec<f64> = [lo, hi].into_iter().filter(|&v| v > 0.0).collect();
        for (slot, v) in r.iter_mut().zip(pos) {
            *slot = v;
        }
        r
    };
    let step = 2.0 * PI / N as f64;
    let grid: Vec<[f64; 2]> = (0..N).map(|i| roots(-PI + i as f64 * step)).collect();
    let mut out = Vec::new();
    for b in 0..2 {
        for i in 0..N {
            let (p, m, n) = (grid[(i + N - 1) % N][b], grid[i][b], grid[(i + 1) % N][b]);
            if !(p.is_finite() && m.is_finite() && n.is_finite()) {
                continue;
            }
            // plateaus (a circle about the origin) carry no tangency
            if m == p && m == n {
                continue;
            }
            let sign = if m <= p && m <= n {
                1.0
            } else if m >= p && m >= n {
                -1.0
            } else {
                continue;
            };
            let phi0 = -PI + i as f64 * step;
            let (mut lo, mut hi) = (phi0 - step, phi0 + step);
            let f = |phi: f64| {
                let v = roots(phi)[b];
                if v.is_finite() {
                    sign * v
                } else {
                    f64::INFINITY
                }
            };
            for _ in 0..60 {
                let (t1, t2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
                if f(t1) <= f(t2) {
                    hi = t2;
                } else {
                    lo = t1;
                }
            }
            let v = roots(0.5 * (lo + hi))[b];
            if v.is_finite() {
                out.push(v);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient_field::{Diffusion, Drift};
    use std::sync::Arc;

    fn v1(x: f64) -> Vector {
        Vector::from_slice(&[x])
    }

    fn additive_ball(alpha: f64, kappa: f64) -> CouplingKernel {
        let levy = LevyModel::new(1, alpha, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let cf = CoefficientField::additive(1, Drift::Zero, 1.0).unwrap();
        CouplingKernel::new(levy, cf, kappa).unwrap()
    }

    /// Trapezoid on a fine uniform grid, avoiding the poles at 0 and −a.
    fn trapezoid_mass(alpha: f64, a: f64, n: usize) -> f64 {
        let q = |z: f64| if z != 0.0 && z.abs() <= 1.0 { z.abs().powf(-1.0 - alpha) } else { 0.0 };
        let m = |z: f64| {
            let (p, s) = (q(z), q(z + a));
            if p.is_infinite() {
                s
            } else if s.is_infinite() {
                p
            } else {
                p.min(s)
            }
        };
        // the integrand is bounded by (a/2)^{-1-α}; pieces split at the kinks
        let pts = [-1.0 - a, -1.0, -a, -a / 2.0, 0.0, 1.0 - a, 1.0];
        let mut pts = pts.to_vec();
        pts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let h = (hi - lo) / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let z = lo + i as f64 * h;
                let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
                // nudge endpoints off the poles
                let zz = if z == 0.0 || z == -a { z + 1e-14 * h } else { z };
                let val = m(zz);
                if val.is_finite() {
                    s += wgt * val;
                }
            }
            total += s * h;
        }
        total
    }

    #[test]
    fn clipped_difference_examples() {
        assert_eq!(clipped_difference(&v1(2.0), &v1(2.0), 1.0)[0], 0.0);
        assert_eq!(clipped_difference(&v1(3.0), &v1(1.0), 5.0)[0], 2.0);
        assert_eq!(clipped_difference(&v1(3.0), &v1(1.0), 0.5)[0], 0.5);
    }

    #[test]
    fn psi_examples() {
        let k = additive_ball(0.5, 1.0);
        let pm = k.pair(&v1(0.4), &v1(0.4)).unwrap();
        assert_eq!(pm.psi(&v1(0.7))[0], 0.7);
        let pm = k.pair(&v1(0.1), &v1(0.0)).unwrap();
        assert!((pm.psi(&v1(0.2))[0] - 0.3).abs() < 1e-15);

        let sigma: Arc<dyn Fn(&Vector) -> Matrix + Send + Sync> =
            Arc::new(|x: &Vector| Matrix::scalar(1, if x[0] > 0.05 { 2.0 } else { 4.0 }));
        let cf = CoefficientField::with_claimed_constants(1, Drift::Zero, Diffusion::Custom { sigma, diagonal: true }, 4.0, 0.0).unwrap();
        let levy = LevyModel::new(1, 0.5, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let k = CouplingKernel::new(levy, cf, 1.0).unwrap();
        let (x, y, z) = (v1(0.1), v1(0.0), v1(0.2));
        let pm = k.pair(&x, &y).unwrap();
        let p = pm.psi(&z);
        assert!((p[0] - 0.125).abs() < 1e-15);
        let gap = (x + pm.sigma_x.mul_vec(&z)) - (y + pm.sigma_y.mul_vec(&p));
        assert!(gap[0].abs() < 1e-15);
        assert!((pm.psi_inverse(&p)[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rho_examples() {
        let k = additive_ball(0.5, 1.0);
        let pm = k.pair(&v1(0.1), &v1(0.0)).unwrap();
        let (rp, _) = pm.rho(&v1(0.2)).unwrap();
        assert!((rp - (0.2f64 / 0.3).powf(1.5)).abs() < 1e-12);
        assert!((rp - 0.5443).abs() < 1e-4);
        assert_eq!(pm.rho(&v1(0.95)).unwrap().0, 0.0);
        assert!(matches!(pm.rho(&v1(1.5)), Err(Error::UndefinedRatio(_))));
        let same = k.pair(&v1(0.3), &v1(0.3)).unwrap();
        assert_eq!(same.rho(&v1(0.2)).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn mass_matches_trapezoid_oracle() {
        let k = additive_ball(0.5, 1.0);
        let pm = k.pair(&v1(0.1), &v1(0.0)).unwrap();
        let mass = pm.mu_mass(&QuadOptions::default()).unwrap().value;
        let oracle = trapezoid_mass(0.5, 0.1, 400_000);
        // min switches at z = −a/2, giving 2∫_{a/2}^1 t^{−3/2} dt = 4(√20 − 1)
        assert!((oracle - 13.888_543_82).abs() < 2e-4 * oracle, "oracle {oracle}");
        assert!((mass / oracle - 1.0).abs() < 1e-4, "{mass} vs {oracle}");
    }

    #[test]
    fn mass_symmetric_and_scales() {
        let k = additive_ball(0.5, 1.0);
        let opts = QuadOptions::default();
        let a = k.pair(&v1(0.3), &v1(0.2)).unwrap().mu_mass(&opts).unwrap().value;
        let b = k.pair(&v1(0.2), &v1(0.3)).unwrap().mu_mass(&opts).unwrap().value;
        assert!((a / b - 1.0).abs() < 1e-9);
        let scaled: Vec<f64> =
            [0.1, 0.05, 0.025].iter().map(|&r| k.pair(&v1(r), &v1(0.0)).unwrap().mu_mass(&opts).unwrap().value * r.powf(0.5)).collect();
        for s in &scaled {
            assert!(*s > 1.0 && *s < 20.0, "{scaled:?}");
        }
    }

    #[test]
    fn coalescence_identity_multiplicative() {
        let levy = LevyModel::new(2, 1.2, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let cf = CoefficientField::new(2, Drift::Zero, Diffusion::Rotation { base: 2.0, amp: 0.5, angle: 0.4 }).unwrap();
        let k = CouplingKernel::new(levy, cf, 1.0).unwrap();
        let x = Vector::from_slice(&[0.3, -1.2]);
        let y = Vector::from_slice(&[0.1, -0.8]);
        let pm = k.pair(&x, &y).unwrap();
        for i in 0..50 {
            let z = crate::grid::direction(2, i).scale(0.02 * (i as f64 + 1.0));
            let p = pm.psi(&z);
            let gap = (x + pm.sigma_x.mul_vec(&z)) - (y + pm.sigma_y.mul_vec(&p));
            assert!(gap.norm() <= 1e-10 * (1.0 + x.norm() + z.norm()));
            assert!((pm.psi_inverse(&p) - z).norm() < 1e-12);
        }
    }

    #[test]
    fn pushforward_examples() {
        let opts = QuadOptions::default().with_rel_tol(1e-10);
        let k = additive_ball(0.5, 1.0);
        let pm = k.pair(&v1(0.1), &v1(0.0)).unwrap();
        let one = |_: &Vector| 1.0;
        let lin = |z: &Vector| z[0];
        assert!(pushforward_identity_check(&pm, &[&one], &opts).unwrap() <= 1e-6);
        assert!(pushforward_identity_check(&pm, &[&lin], &opts).unwrap() <= 1e-4);

        let levy = LevyModel::new(1, 0.5, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let cf = CoefficientField::new(1, Drift::Zero, Diffusion::DiagonalSin { base: 2.0, amp: 1.0 }).unwrap();
        let k = CouplingKernel::new(levy, cf, 1.0).unwrap();
        let pm = k.pair(&v1(0.7), &v1(0.45)).unwrap();
        let cos = |z: &Vector| z[0].cos();
        assert!(pushforward_identity_check(&pm, &[&cos, &one], &opts).unwrap() <= 1e-3);
    }

    #[test]
    fn additive_far_pair_distances() {
        let k = additive_ball(1.5, 0.3);
        let pm = k.pair(&v1(1.0), &v1(0.0)).unwrap();
        let z = v1(0.4);
        let xp = 1.0 + 0.4;
        let yc = 0.0 + pm.psi(&z)[0];
        let yr = 0.0 + pm.psi_inverse(&z)[0];
        assert!(((xp - yc) - 0.7).abs() < 1e-15);
        assert!(((xp - yr) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn decision_bands() {
        let k = additive_ball(0.5, 1.0);
        let pm = k.pair(&v1(0.1), &v1(0.0)).unwrap();
        let z = v1(0.2);
        let (rp, ri) = pm.rho(&z).unwrap();
        assert_eq!(pm.decide(&z, 0.5 * rp).unwrap().branch, Branch::Coalesce);
        assert_eq!(pm.decide(&z, 0.5 * rp + 1e-9).unwrap().branch, Branch::Reflect);
        assert_eq!(pm.decide(&z, 0.5 * (rp + ri) + 1e-9).unwrap().branch, Branch::Synchronize);
        let d = pm.decide(&z, 0.0).unwrap();
        assert!((d.y_jump[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn envelope_keeps_denominator() {
        let nu = LevyModel::new(1, 0.5, 2.0, 1.0, SupportVariant::Ball).unwrap();
        let nu0 = LevyModel::new(1, 0.5, 1.0, 1.0, SupportVariant::Ball).unwrap().with_envelope(nu).unwrap();
        let cf = CoefficientField::additive(1, Drift::Zero, 1.0).unwrap();
        let k = CouplingKernel::new(nu0, cf, 1.0).unwrap();
        let pm = k.pair(&v1(0.1), &v1(0.0)).unwrap();
        let (rp, _) = pm.rho(&v1(0.2)).unwrap();
        assert!((rp - 0.5 * (0.2f64 / 0.3).powf(1.5)).abs() < 1e-12);
    }

    /// Sign changes of the trigonometric form on a fine grid, refined by
    /// bisection.
    fn scan_crossings(a: &Matrix, shift: &Vector, c: f64, level: f64, r: f64) -> Vec<f64> {
        let g = |phi: f64| {
            let z = Vector::from_slice(&[r * phi.cos(), r * phi.sin()]);
            (a.mul_vec(&z) + *shift).norm_sq() - c * c * z.norm_sq() - level
        };
        let n = 20_000;
        let h = 2.0 * PI / n as f64;
        let mut out = Vec::new();
        for i in 0..n {
            let (mut lo, mut hi) = (-PI + i as f64 * h, -PI + (i + 1) as f64 * h);
            if g(lo).signum() == g(hi).signum() {
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if g(mid).signum() == g(lo).signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        out
    }

    #[test]
    fn circle_crossings_match_scan() {
        let a = Matrix::from_rows(&[&[1.3, 0.4], &[-0.2, 0.7]]);
        let shift = Vector::from_slice(&[0.35, -0.6]);
        let mut checked = 0;
        for (c, level) in [(0.0, 1.0), (0.0, 0.25), (0.8, 0.0), (1.1, 0.0)] {
            for r in [0.05, 0.3, 0.6, 0.9, 1.4] {
                let want = scan_crossings(&a, &shift, c, level, r);
                let got = circle_crossings(&a, &shift, c, level, r);
                for w in &want {
                    assert!(got.iter().any(|g| (g - w).abs() < 1e-7), "c={c} level={level} r={r}: {w} not in {got:?}");
                }
                checked += want.len();
            }
        }
        assert!(checked >= 10, "{checked}");
    }

    #[test]
    fn quartic_roots_examples() {
        // (t − 1)(t + 2)(t² + 1)
        let mut r = real_poly_roots(&[1.0, 1.0, -1.0, 1.0, -2.0], 1.0);
        r.sort_by(f64::total_cmp);
        assert_eq!(r.len(), 2);
        assert!((r[0] + 2.0).abs() < 1e-12 && (r[1] - 1.0).abs() < 1e-12, "{r:?}");
        // degenerate leading coefficient: 2t − 1
        let r = real_poly_roots(&[0.0, 0.0, 0.0, 2.0, -1.0], 1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn multiplicative_masses_agree_in_2d() {
        let levy = LevyModel::new(2, 1.2, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let cf = CoefficientField::new(2, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 0.5 }).unwrap();
        let k = CouplingKernel::new(levy, cf, 1.0).unwrap();
        let opts = QuadOptions::default().with_rel_tol(1e-9);
        // the second pair sits past κ, so the shift is clipped
        for (x, y) in [([-0.625, -0.375], [-0.956, -1.013]), ([0.375, 0.625], [1.501, 1.036])] {
            let pm = k.pair(&Vector::from_slice(&x), &Vector::from_slice(&y)).unwrap();
            let a = pm.mu_mass(&opts).unwrap().value;
            let b = pm.mu_inverse_mass(&opts).unwrap().value;
            assert!(((a - b) / a).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
