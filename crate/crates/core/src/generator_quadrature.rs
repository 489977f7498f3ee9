//! Quadrature of the generator `L`, the coupling operator `L̃` (pair form and
//! radial I₁..I₅ form), the marginality identity and the drift upper bound.

use crate::coefficient_field::CoefficientField;
use crate::coupling_kernel::{Branch, CouplingKernel, PairMap};
use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::linalg::{Matrix, Vector};
use crate::quadrature::{self, QuadOptions};
use crate::test_functions::{PairFn, RadialFn, Separable, SharedFn, SmoothFn};

/// Gauss–Legendre nodes and weights on [0, 1].
const GL_T: [f64; 4] = [0.069_431_844_202_973_71, 0.330_009_478_207_571_9, 0.669_990_521_792_428_1, 0.930_568_155_797_026_3];
const GL_W: [f64; 4] = [0.173_927_422_568_726_93, 0.326_072_577_431_273_07, 0.326_072_577_431_273_07, 0.173_927_422_568_726_93];

/// Below this jump length the compensated difference is evaluated through
/// its integral remainder instead of by subtraction.
const SMOOTH_TAYLOR_LEN: f64 = 1e-2;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GenEstimate {
    pub value: f64,
    pub residual: f64,
}

/// `δ_q`, the radius below which the jump integral is replaced by its
/// second-order Taylor term.
pub fn small_ball_radius(levy: &LevyModel) -> f64 {
    1e-6 * levy.eta()
}

/// `∫_{|z|<δ} |z|² ν(dz)` for `δ < η`.
pub fn small_ball_second_moment(levy: &LevyModel, delta: f64) -> f64 {
    let a = levy.alpha();
    levy.c0() * quadrature::sphere_area(levy.dim()) * levy.small_sphere_fraction() * delta.powf(2.0 - a) / (2.0 - a)
}

/// `∫₀¹ (1−t) g(t) dt` by 4-point Gauss–Legendre.
fn remainder_integral<G: Fn(f64) -> f64>(g: G) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        s += GL_W[i] * (1.0 - GL_T[i]) * g(GL_T[i]);
    }
    s
}

/// `wᵀHw` for a symmetric matrix.
fn quad_form(h: &Matrix, w: &Vector) -> f64 {
    w.dot(&h.mul_vec(w))
}

/// `f(x+w) − f(x) − ⟨∇f(x), w⟩·1{compensate}`.
fn compensated(f: &dyn SmoothFn, x: &Vector, fx: f64, grad: &Vector, w: &Vector, compensate: bool) -> f64 {
    if compensate && w.norm() <= SMOOTH_TAYLOR_LEN {
        return remainder_integral(|t| quad_form(&f.hessian(&(*x + w.scale(t))), w));
    }
    let mut v = f.value(&(*x + *w)) - fx;
    if compensate {
        v -= grad.dot(w);
    }
    v
}

/// The Lévy generator
/// `Lf(x) = ⟨∇f, b⟩ + ∫(f(x+σ(x)z) − f(x) − ⟨∇f, σ(x)z⟩1{|z|≤1}) ν(dz)`
/// with ν the driving measure of `levy`.
pub fn generator_l(cf: &CoefficientField, levy: &LevyModel, f: &dyn SmoothFn, x: &Vector, opts: &QuadOptions) -> Result<GenEstimate> {
    let nu = levy.driving();
    let s = cf.sigma(x);
    let fx = f.value(x);
    let grad = f.gradient(x);
    let drift = grad.dot(&cf.b(x));
    let dq = small_ball_radius(nu);
    let est = nu
        .integrate_against(
            |z| {
                let w = s.mul_vec(z);
                compensated(f, x, fx, &grad, &w, z.norm() <= 1.0)
            },
            dq,
            f64::INFINITY,
            &[],
            opts,
        )
        .require(opts, 10.0, "generator L")?;
    let hess = f.hessian(x);
    let m2 = small_ball_second_moment(nu, dq);
    let small = 0.5 * s.transpose().mul_mat(&hess).mul_mat(&s).trace() * m2 / x.dim() as f64;
    let bound = hess.frobenius() * s.frobenius().powi(2) * m2;
    Ok(GenEstimate { value: drift + est.value + small, residual: est.error + bound * dq })
}

/// `L̃h(x,y)` for a pair function, assembled as one z-integral
/// `q_ν·C + ½m_Ψ·(A−C) + ½m_{Ψ⁻¹}·(B−C)` where A, B, C are the compensated
/// jump differences of the three branches.
pub fn coupling_generator(k: &CouplingKernel, h: &dyn PairFn, x: &Vector, y: &Vector, opts: &QuadOptions) -> Result<GenEstimate> {
    let pm = k.pair(x, y)?;
    let cf = k.coeff();
    let nu = k.driving();
    let (gx, gy) = h.gradients(x, y);
    let (hxx, hxy, hyy) = h.hessian_blocks(x, y);
    let h0 = h.value(x, y);
    let drift = gx.dot(&cf.b(x)) + gy.dot(&cf.b(y));
    let (sx, sy) = (pm.sigma_x, pm.sigma_y);

    let jump_diff = |wx: &Vector, wy: &Vector, cx: bool, cy: bool| -> f64 {
        let len = (wx.norm_sq() + wy.norm_sq()).sqrt();
        if cx && cy && len <= SMOOTH_TAYLOR_LEN {
            return remainder_integral(|t| {
                let (a, b, c) = h.hessian_blocks(&(*x + wx.scale(t)), &(*y + wy.scale(t)));
                quad_form(&a, wx) + 2.0 * wx.dot(&b.mul_vec(wy)) + quad_form(&c, wy)
            });
        }
        let mut v = h.value(&(*x + *wx), &(*y + *wy)) - h0;
        if cx {
            v -= gx.dot(wx);
        }
        if cy {
            v -= gy.dot(wy);
        }
        v
    };

    let dq = small_ball_radius(nu);
    let sync = nu
        .integrate_against(
            |z| {
                let small = z.norm() <= 1.0;
                jump_diff(&sx.mul_vec(z), &sy.mul_vec(z), small, small)
            },
            dq,
            f64::INFINITY,
            &pm.special_radii(),
            opts,
        )
        .require(opts, 10.0, "coupling generator")?;
    let mut est = sync;
    // The μ corrections are bounded near z = 0 but not symmetric about it,
    // so they are integrated down to the kernel's inner radius rather than δ_q.
    if !pm.is_identity() {
        // The corrections often nearly cancel, so their tolerance is set by
        // the size of the whole expression rather than by their own.
        let copts = opts.with_abs_tol(opts.abs_tol.max(opts.rel_tol * (sync.value.abs() + drift.abs())));
        let corr = k
            .levy()
            .integrate_over_support_split(
                |z| {
                    let mp = pm.m_psi(z);
                    let mi = pm.m_psi_inverse(z);
                    if mp == 0.0 && mi == 0.0 {
                        return 0.0;
                    }
                    let small = z.norm() <= 1.0;
                    let wx = sx.mul_vec(z);
                    let c = jump_diff(&wx, &sy.mul_vec(z), small, small);
                    let mut out = 0.0;
                    if mp > 0.0 {
                        let p = pm.psi(z);
                        out += 0.5 * mp * (jump_diff(&wx, &sy.mul_vec(&p), small, p.norm() <= 1.0) - c);
                    }
                    if mi > 0.0 {
                        let p = pm.psi_inverse(z);
                        out += 0.5 * mi * (jump_diff(&wx, &sy.mul_vec(&p), small, p.norm() <= 1.0) - c);
                    }
                    out
                },
                pm.mu_inner_radius(),
                f64::INFINITY,
                &pm.special_radii(),
                |r| pm.angular_breaks(r),
                &copts,
            )
            .require(&copts, 10.0, "coupling generator")?;
        est.value += corr.value;
        est.error += corr.error;
    }
    // Small ball: only the synchronous part is singular there.
    let m2 = small_ball_second_moment(nu, dq);
    let sxt = sx.transpose();
    let tr = sxt.mul_mat(&hxx).mul_mat(&sx).trace()
        + 2.0 * sxt.mul_mat(&hxy).mul_mat(&sy).trace()
        + sy.transpose().mul_mat(&hyy).mul_mat(&sy).trace();
    let small = 0.5 * tr * m2 / x.dim() as f64;
    Ok(GenEstimate { value: drift + est.value + small, residual: est.error + small.abs() * dq })
}

/// The radial form `L̃f(|x−y|) = I₁ + … + I₅`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RadialBreakdown {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub i5: f64,
    pub total: f64,
    pub residual: f64,
}

/// Hessian of `w ↦ f(|w|)`.
fn radial_hessian(f: &dyn RadialFn, w: &Vector) -> Matrix {
    let r = w.norm();
    let d = w.dim();
    let f1 = f.d1(r) / r;
    let f2 = f.d2(r);
    let mut h = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..d {
            let delta = if i == j { 1.0 } else { 0.0 };
            let uu = w[i] * w[j] / (r * r);
            h.set(i, j, f2 * uu + f1 * (delta - uu));
        }
    }
    h
}

pub fn coupling_generator_radial(
    k: &CouplingKernel,
    f: &dyn RadialFn,
    x: &Vector,
    y: &Vector,
    opts: &QuadOptions,
) -> Result<RadialBreakdown> {
    let pm = k.pair(x, y)?;
    if pm.is_identity() {
        return Err(Error::Domain("radial coupling generator needs x != y".into()));
    }
    radial_terms(&pm, f, opts)
}

fn radial_terms(pm: &PairMap<'_>, f: &dyn RadialFn, opts: &QuadOptions) -> Result<RadialBreakdown> {
    let k = pm.kernel();
    let cf = k.coeff();
    let nu = k.driving();
    let u = pm.x - pm.y;
    let r = u.norm();
    let fr = f.value(r);
    let f1 = f.d1(r);
    let (sx, sy) = (pm.sigma_x, pm.sigma_y);
    let ds = sx.sub(&sy);
    let additive = cf.is_additive();
    let mut residual = 0.0;

    let i1 = f1 / r * (cf.b(&pm.x) - cf.b(&pm.y)).dot(&u);

    let i2 = if additive {
        0.0
    } else {
        let g = |z: &Vector| if z.norm() <= 1.0 { ds.mul_vec(z).dot(&u) } else { 0.0 };
        let a = pm.mu_integral(Branch::Coalesce, g, 0.0, 1.0, opts).require(opts, 10.0, "I2")?;
        let b = pm.mu_integral(Branch::Reflect, g, 0.0, 1.0, opts).require(opts, 10.0, "I2")?;
        residual += a.error + b.error;
        -f1 / (2.0 * r) * (a.value + b.value)
    };

    let e3 = pm
        .mu_integral(Branch::Coalesce, |z| f.value((u + sx.mul_vec(z) - sy.mul_vec(&pm.psi(z))).norm()) - fr, 0.0, f64::INFINITY, opts)
        .require(opts, 10.0, "I3")?;
    let e4 = pm
        .mu_integral(
            Branch::Reflect,
            |z| f.value((u + sx.mul_vec(z) - sy.mul_vec(&pm.psi_inverse(z))).norm()) - fr,
            0.0,
            f64::INFINITY,
            opts,
        )
        .require(opts, 10.0, "I4")?;
    residual += 0.5 * (e3.error + e4.error);
    let i3 = 0.5 * e3.value;
    let i4 = 0.5 * e4.value;

    let i5 = if additive || ds.max_abs() == 0.0 {
        0.0
    } else {
        let tau = 0.05 * r;
        let diff = |z: &Vector| -> f64 {
            let w = ds.mul_vec(z);
            if z.norm() <= 1.0 {
                if w.norm() <= tau {
                    remainder_integral(|t| quad_form(&radial_hessian(f, &(u + w.scale(t))), &w))
                } else {
                    f.value((u + w).norm()) - fr - f1 / r * u.dot(&w)
                }
            } else {
                f.value((u + w).norm()) - fr
            }
        };
        let dq = small_ball_radius(nu);
        let est = nu
            .integrate_over_support_split(
                |z| {
                    let q = nu.q(z);
                    if q == 0.0 {
                        return 0.0;
                    }
                    let wgt = q - 0.5 * pm.m_psi(z) - 0.5 * pm.m_psi_inverse(z);
                    if wgt == 0.0 {
                        0.0
                    } else {
                        wgt * diff(z)
                    }
                },
                dq,
                f64::INFINITY,
                &pm.special_radii(),
                |r| pm.angular_breaks(r),
                opts,
            )
            .require(opts, 10.0, "I5")?;
        residual += est.error;
        let m2 = small_ball_second_moment(nu, dq);
        let h = radial_hessian(f, &u);
        let small = 0.5 * ds.transpose().mul_mat(&h).mul_mat(&ds).trace() * m2 / u.dim() as f64;
        residual += small.abs() * dq;
        est.value + small
    };

    Ok(RadialBreakdown { i1, i2, i3, i4, i5, total: i1 + i2 + i3 + i4 + i5, residual })
}

#[derive(Clone, Debug)]
pub struct MarginalityRow {
    pub x: Vector,
    pub y: Vector,
    pub f: String,
    pub g: String,
    pub coupled: f64,
    pub lf: f64,
    pub lg: f64,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct MarginalityReport {
    pub rows: Vec<MarginalityRow>,
    pub max_error: f64,
}

/// `|L̃(f⊕g)(x,y) − Lf(x) − Lg(y)| / (1 + |Lf(x)| + |Lg(y)|)` over all
/// function pairs and points.
pub fn marginality_suite(
    k: &CouplingKernel,
    fs: &[SharedFn],
    gs: &[SharedFn],
    points: &[(Vector, Vector)],
    opts: &QuadOptions,
) -> Result<MarginalityReport> {
    if fs.is_empty() || gs.is_empty() || points.is_empty() {
        return Err(Error::Precondition("marginality_suite needs nonempty inputs".into()));
    }
    use rayon::prelude::*;
    let jobs: Vec<(usize, usize, usize)> =
        (0..points.len()).flat_map(|p| (0..fs.len()).flat_map(move |i| (0..gs.len()).map(move |j| (p, i, j)))).collect();
    let rows: Result<Vec<MarginalityRow>> = jobs
        .par_iter()
        .map(|&(p, i, j)| {
            let (x, y) = &points[p];
            let h = Separable::sum(fs[i].clone(), gs[j].clone());
            let lhs = coupling_generator(k, &h, x, y, opts)?.value;
            let lf = generator_l(k.coeff(), k.levy(), fs[i].as_ref(), x, opts)?.value;
            let lg = generator_l(k.coeff(), k.levy(), gs[j].as_ref(), y, opts)?.value;
            let error = (lhs - lf - lg).abs() / (1.0 + lf.abs() + lg.abs());
            Ok(MarginalityRow { x: *x, y: *y, f: fs[i].name(), g: gs[j].name(), coupled: lhs, lf, lg, error })
        })
        .collect();
    let rows = rows?;
    let max_error = rows.iter().map(|r| r.error).fold(0.0, f64::max);
    Ok(MarginalityReport { rows, max_error })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DriftBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// `None` stands for R = ∞.
    pub radius: Option<f64>,
    pub theta0: f64,
    pub drift: f64,
    pub theta_le: f64,
    pub theta_gt: f64,
    pub mu_mass: f64,
    pub residual: f64,
}

/// The upper bound
/// `Θ₀(f) + f′(r)/r⟨b(x)−b(y), x−y⟩ + f′(r)‖σ(x)−σ(y)‖_HS·Θ_{≤R} + Θ_{>R}(f)`
/// on `L̃f(|x−y|)`, with Λ the Hilbert–Schmidt bound of the coefficients.
pub fn drift_bound_check(
    k: &CouplingKernel,
    f: &dyn RadialFn,
    x: &Vector,
    y: &Vector,
    radius: Option<f64>,
    opts: &QuadOptions,
) -> Result<DriftBoundReport> {
    if let Some(rr) = radius {
        if !(rr >= 1.0) {
            return Err(Error::Precondition(format!("bound radius R={rr} must be at least 1")));
        }
    }
    let pm = k.pair(x, y)?;
    if pm.is_identity() {
        return Err(Error::Domain("drift bound needs x != y".into()));
    }
    let cf = k.coeff();
    let nu = k.driving();
    let moments = nu.moment_integrals(opts)?;
    if radius.is_none() && !moments.big_first_finite {
        return Err(Error::Precondition("R = infinity needs a finite first moment of big jumps".into()));
    }
    let lhs = radial_terms(&pm, f, opts)?;
    let u = *x - *y;
    let r = u.norm();
    let rk = r.min(k.kappa());
    let f1 = f.d1(r);
    let mass = pm.mu_mass(opts)?;
    let mut residual = lhs.residual + mass.error;

    let theta0 = 0.5 * mass.value * (f.value(r + rk) + f.value(r - rk) - 2.0 * f.value(r));
    let drift = f1 / r * (cf.b(x) - cf.b(y)).dot(&u);
    let delta = pm.sigma_x.sub(&pm.sigma_y).frobenius();
    let lam = cf.lambda_hs();

    let (theta_le, theta_gt) = if delta == 0.0 {
        (0.0, 0.0)
    } else {
        let rr = radius.unwrap_or(f64::INFINITY);
        let fm_a = pm.mu_first_moment(Branch::Coalesce, rr, opts)?;
        let fm_b = pm.mu_first_moment(Branch::Reflect, rr, opts)?;
        residual += fm_a.error + fm_b.error;
        let mid = match radius {
            None => moments.big_first,
            Some(rr) => {
                let e = nu.integrate_against(|z| z.norm(), 1.0, rr, &[], opts).require(opts, 10.0, "first moment 1<|z|<=R")?;
                residual += e.error;
                e.value
            }
        };
        let le =
            lam * mass.value * rk + delta / (2.0 * r) * moments.small_square + (1.0 + lam * lam / 2.0) * (fm_a.value + fm_b.value) + mid;
        let gt = match radius {
            None => 0.0,
            Some(rr) => {
                let e = nu.integrate_against(|z| f.value((1.0 + lam * lam) * delta * z.norm()), rr, f64::INFINITY, &[], opts).require(
                    opts,
                    10.0,
                    "theta > R",
                )?;
                residual += e.error;
                2.0 * e.value
            }
        };
        (le, gt)
    };
    let rhs = theta0 + drift + f1 * delta * theta_le + theta_gt;
    Ok(DriftBoundReport {
        lhs: lhs.total,
        rhs,
        slack: rhs - lhs.total,
        radius,
        theta0,
        drift,
        theta_le,
        theta_gt,
        mu_mass: mass.value,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient_field::{Diffusion, Drift};
    use crate::levy_model::SupportVariant;
    use crate::test_functions::*;
    use std::sync::Arc;

    fn v1(x: f64) -> Vector {
        Vector::from_slice(&[x])
    }

    fn ball1(alpha: f64) -> LevyModel {
        LevyModel::new(1, alpha, 1.0, 1.0, SupportVariant::Ball).unwrap()
    }

    #[test]
    fn generator_examples() {
        let opts = QuadOptions::default();
        let cf = CoefficientField::additive(1, Drift::Zero, 1.0).unwrap();
        let levy = ball1(0.5);
        let c = generator_l(&cf, &levy, &Constant(3.0), &v1(0.4), &opts).unwrap();
        assert_eq!(c.value, 0.0);
        let q = generator_l(&cf, &levy, &SquaredNorm, &v1(0.4), &opts).unwrap();
        assert!((q.value - 4.0 / 3.0).abs() < 1e-7, "{q:?}");

        let cf = CoefficientField::additive(2, Drift::Linear { rate: 0.7 }, 1.0).unwrap();
        let levy = LevyModel::new(2, 1.2, 1.0, 1.0, SupportVariant::Ball).unwrap();
        let c = Vector::from_slice(&[0.3, -1.1]);
        let x = Vector::from_slice(&[0.5, 2.0]);
        let l = generator_l(&cf, &levy, &Linear(c), &x, &opts).unwrap();
        assert!((l.value - c.dot(&cf.b(&x))).abs() < 1e-9);
    }

    #[test]
    fn marginal_reductions() {
        let opts = QuadOptions::default();
        let levy = ball1(1.5);
        let cf =
            CoefficientField::new(1, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 1.0 }).unwrap();
        let k = CouplingKernel::new(levy.clone(), cf.clone(), 1.0).unwrap();
        let f: SharedFn = Arc::new(GaussianBump { center: v1(0.2), width: 0.6, height: 1.0 });
        let (x, y) = (v1(0.1), v1(0.35));
        let on_x = coupling_generator(&k, &Separable::on_x(f.clone()), &x, &y, &opts).unwrap().value;
        let lf = generator_l(&cf, &levy, f.as_ref(), &x, &opts).unwrap().value;
        assert!((on_x - lf).abs() <= 1e-6 * lf.abs().max(1.0), "{on_x} vs {lf}");
        let on_y = coupling_generator(&k, &Separable::on_y(f.clone()), &x, &y, &opts).unwrap().value;
        let lg = generator_l(&cf, &levy, f.as_ref(), &y, &opts).unwrap().value;
        assert!((on_y - lg).abs() <= 1e-6 * lg.abs().max(1.0), "{on_y} vs {lg}");
    }

    #[test]
    fn radial_and_pair_forms_agree() {
        let opts = QuadOptions::default();
        let levy = ball1(1.2);
        let cf = CoefficientField::new(1, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 0.5 }).unwrap();
        let k = CouplingKernel::new(levy, cf, 0.5).unwrap();
        let prof = Arc::new(GaussianProfile { width: 0.8 });
        let (x, y) = (v1(0.3), v1(-0.1));
        let radial = coupling_generator_radial(&k, prof.as_ref(), &x, &y, &opts).unwrap();
        let pair = coupling_generator(&k, &OfDistance(prof), &x, &y, &opts).unwrap();
        assert!((radial.total - pair.value).abs() < 1e-6 * (1.0 + pair.value.abs()), "{radial:?} vs {pair:?}");
    }

    #[test]
    fn additive_i3_i4_closed_forms() {
        let opts = QuadOptions::default();
        let k = CouplingKernel::new(ball1(0.5), CoefficientField::additive(1, Drift::Zero, 1.0).unwrap(), 1.0).unwrap();
        let f = PowerCapped::new(1.0, 2.0).unwrap();
        let (x, y) = (v1(0.2), v1(0.0));
        let br = coupling_generator_radial(&k, &f, &x, &y, &opts).unwrap();
        let mass = k.pair(&x, &y).unwrap().mu_mass(&opts).unwrap().value;
        let want3 = 0.5 * mass * (f.value(0.0) - f.value(0.2));
        let want4 = 0.5 * mass * (f.value(0.4) - f.value(0.2));
        assert!((br.i3 / want3 - 1.0).abs() < 1e-6);
        assert!((br.i4 / want4 - 1.0).abs() < 1e-6);
        assert_eq!((br.i2, br.i5), (0.0, 0.0));
        assert!(matches!(coupling_generator_radial(&k, &f, &x, &x, &opts), Err(Error::Domain(_))));
    }

    #[test]
    fn marginality_zero_functions() {
        let opts = QuadOptions::default();
        let k = CouplingKernel::new(ball1(0.5), CoefficientField::additive(1, Drift::Zero, 1.0).unwrap(), 1.0).unwrap();
        let zero: SharedFn = Arc::new(Constant(0.0));
        let rep = marginality_suite(&k, std::slice::from_ref(&zero), std::slice::from_ref(&zero), &[(v1(0.1), v1(0.4))], &opts).unwrap();
        assert_eq!(rep.max_error, 0.0);
    }

    #[test]
    fn drift_bound_additive_and_multiplicative() {
        let opts = QuadOptions::default();
        let f = PowerCapped::new(0.5, 2.0).unwrap();
        let k = CouplingKernel::new(ball1(0.5), CoefficientField::additive(1, Drift::Linear { rate: 1.0 }, 1.0).unwrap(), 1.0).unwrap();
        let rep = drift_bound_check(&k, &f, &v1(0.3), &v1(0.05), Some(2.0), &opts).unwrap();
        assert!(rep.slack >= -1e-6, "{rep:?}");
        assert!(rep.theta0 <= 0.0);
        assert_eq!((rep.theta_le, rep.theta_gt), (0.0, 0.0));

        let cf =
            CoefficientField::new(1, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 1.0 }).unwrap();
        let k = CouplingKernel::new(ball1(1.5), cf, 1.0).unwrap();
        for (x, y) in [(0.3, 0.05), (-1.0, 2.5), (4.0, 3.99)] {
            for radius in [Some(2.0), None] {
                let rep = drift_bound_check(&k, &f, &v1(x), &v1(y), radius, &opts).unwrap();
                assert!(rep.slack >= -1e-6, "{x} {y}: {rep:?}");
            }
        }
    }

    #[test]
    fn theta0_below_second_derivative_bound() {
        // ψ(2r) − 2ψ(r) ≤ ψ″(2r)r² for f‴ ≥ 0, with κ ≥ r
        let opts = QuadOptions::default();
        let k = CouplingKernel::new(ball1(0.5), CoefficientField::additive(1, Drift::Zero, 1.0).unwrap(), 1.0).unwrap();
        let f = PowerCapped::new(0.5, 10.0).unwrap();
        for r in [0.01, 0.05, 0.2, 0.6] {
            let rep = drift_bound_check(&k, &f, &v1(r), &v1(0.0), Some(2.0), &opts).unwrap();
            assert!(rep.theta0 <= 0.5 * rep.mu_mass * f.d2(2.0 * r) * r * r + 1e-12);
        }
    }
}
