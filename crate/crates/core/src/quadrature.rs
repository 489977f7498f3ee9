//! Adaptive Gauss–Kronrod integration and the log-radius × angle product
//! rule used for every integral against a Lévy density.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Vector;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

#[derive(Clone, Copy, Debug)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl Estimate {
    pub fn zero() -> Self {
        Estimate { value: 0.0, error: 0.0, evaluations: 0, converged: true }
    }

    /// Turn an unconverged estimate into an error unless its residual is
    /// within `slack` times the requested tolerance.
    pub fn require(self, opts: &QuadOptions, slack: f64, context: &str) -> Result<Estimate> {
        let target = opts.abs_tol.max(opts.rel_tol * self.value.abs());
        if self.converged || self.error <= slack * target {
            Ok(self)
        } else {
            Err(Error::Quadrature { value: self.value, residual: self.error, context: context.to_string() })
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on subintervals of the outer (radial) integral.
    pub max_intervals: usize,
    /// Cap on subintervals of each inner (angular) integral.
    pub inner_max_intervals: usize,
    /// Initial log-spaced radial shells; 0 picks a default by dimension.
    pub shells: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-9, abs_tol: 1e-13, max_intervals: 4000, inner_max_intervals: 400, shells: 0 }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_shells(mut self, shells: usize) -> Self {
        self.shells = shells;
        self
    }

    pub fn shells_for(&self, dim: usize) -> usize {
        if self.shells > 0 {
            self.shells
        } else if dim == 1 {
            200
        } else {
            40
        }
    }
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive G7/K15 over `[a, b]`, with the range first split at
/// every breakpoint strictly inside it.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Estimate {
    if !(b > a) {
        return Estimate::zero();
    }
    let mut cuts: Vec<f64> = Vec::with_capacity(breakpoints.len() + 2);
    cuts.push(a);
    cuts.extend(breakpoints.iter().copied().filter(|&p| p > a && p < b));
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let mut heap = BinaryHeap::with_capacity(cuts.len() * 2);
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evals = 0;
    for w in cuts.windows(2) {
        let (v, e) = gk15(&mut f, w[0], w[1]);
        evals += 15;
        total += v;
        err += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, error: e });
    }
    let min_width = (b - a) * 1e-13;
    loop {
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Estimate { value: total, error: err, evaluations: evals, converged: true };
        }
        if heap.len() >= max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        if worst.b - worst.a <= min_width {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, mid);
        let (v2, e2) = gk15(&mut f, mid, worst.b);
        evals += 30;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum to shed the drift of incremental updates.
    let (mut total, mut err) = (0.0, 0.0);
    for p in heap.iter() {
        total += p.value;
        err += p.error;
    }
    let converged = err <= abs_tol.max(rel_tol * total.abs());
    Estimate { value: total, error: err, evaluations: evals, converged }
}

/// Angular coordinate ranges at a given radius where an integrand may be
/// nonzero.
///
/// * d=1: each range is a degenerate point `(s, s)` with `s = ±1`.
/// * d=2: ranges of the polar angle φ, z = r(cos φ, sin φ).
/// * d=3: ranges of u = z₁/r; the azimuth always covers [0, 2π).
pub type AngularRanges = Vec<(f64, f64)>;

pub fn full_sphere(dim: usize) -> AngularRanges {
    match dim {
        1 => vec![(1.0, 1.0), (-1.0, -1.0)],
        2 => vec![(-PI, PI)],
        _ => vec![(-1.0, 1.0)],
    }
}

/// Surface area of the unit sphere in ℝ^d.
pub fn sphere_area(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {dim} unsupported"),
    }
}

/// Radial description of a polar integral: `∫_{r_lo<|z|<r_hi} F(z) dz`.
#[derive(Clone, Debug)]
pub struct RadialRange {
    pub r_lo: f64,
    pub r_hi: f64,
    /// Radii where the integrand is known to be non-smooth.
    pub breaks: Vec<f64>,
}

impl RadialRange {
    pub fn new(r_lo: f64, r_hi: f64) -> Self {
        RadialRange { r_lo, r_hi, breaks: Vec::new() }
    }

    pub fn with_breaks(mut self, breaks: impl IntoIterator<Item = f64>) -> Self {
        self.breaks.extend(breaks.into_iter().filter(|r| r.is_finite() && *r > 0.0));
        self
    }
}

/// `∫ F(z) dz` over the shell `r_lo < |z| < r_hi`, integrating ln|z| on the
/// outside and the angle on the inside.
pub fn integrate_polar<F, A>(dim: usize, f: F, range: &RadialRange, angular: A, opts: &QuadOptions) -> Estimate
where
    F: Fn(&Vector) -> f64,
    A: Fn(f64) -> AngularRanges,
{
    integrate_polar_split(dim, f, range, angular, |_| Vec::new(), opts)
}

/// [`integrate_polar`] with angular breakpoints per radius: polar angles
/// in 2-d where the integrand is known to be non-smooth on the circle of
/// that radius. Ignored in other dimensions.
pub fn integrate_polar_split<F, A, B>(dim: usize, f: F, range: &RadialRange, angular: A, angular_breaks: B, opts: &QuadOptions) -> Estimate
where
    F: Fn(&Vector) -> f64,
    A: Fn(f64) -> AngularRanges,
    B: Fn(f64) -> Vec<f64>,
{
    if !(range.r_hi > range.r_lo) || range.r_lo <= 0.0 {
        return Estimate::zero();
    }
    let s_lo = range.r_lo.ln();
    let s_hi = range.r_hi.ln();
    let shells = opts.shells_for(dim);
    let mut breaks: Vec<f64> = (1..shells).map(|i| s_lo + (s_hi - s_lo) * i as f64 / shells as f64).collect();
    breaks.extend(range.breaks.iter().map(|r| r.ln()));

    let inner_rel = opts.rel_tol;
    let mut inner_evals = 0usize;
    let mut inner_ok = true;
    let outer = integrate(
        |s| {
            let r = s.exp();
            let segments = angular(r);
            let cuts = if dim == 2 { angular_breaks(r) } else { Vec::new() };
            let mut acc = 0.0;
            for &(a, b) in &segments {
                // Spread the outer absolute tolerance over the ln r range.
                let inner_abs = opts.abs_tol / (r.powi(dim as i32) * (s_hi - s_lo));
                let est = angular_integral(dim, &f, r, a, b, &cuts, inner_rel, inner_abs, opts.inner_max_intervals);
                inner_evals += est.evaluations;
                inner_ok &= est.converged;
                acc += est.value;
            }
            acc * r.powi(dim as i32)
        },
        s_lo,
        s_hi,
        &breaks,
        opts.rel_tol,
        opts.abs_tol,
        opts.max_intervals,
    );
    Estimate {
        value: outer.value,
        error: outer.error,
        evaluations: outer.evaluations + inner_evals,
        converged: outer.converged && (inner_ok || outer.error <= opts.rel_tol * outer.value.abs()),
    }
}

fn angular_integral<F: Fn(&Vector) -> f64>(
    dim: usize,
    f: &F,
    r: f64,
    a: f64,
    b: f64,
    cuts: &[f64],
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Estimate {
    match dim {
        1 => {
            let z = Vector::from_slice(&[r * a]);
            Estimate { value: f(&z), error: 0.0, evaluations: 1, converged: true }
        }
        2 => integrate(
            |phi| {
                let (s, c) = phi.sin_cos();
                f(&Vector::from_slice(&[r * c, r * s]))
            },
            a,
            b,
            cuts,
            rel_tol,
            abs_tol,
            max_intervals,
        ),
        _ => {
            let mut evals = 0;
            let mut ok = true;
            let mut est = integrate(
                |u| {
                    let rho = r * (1.0 - u * u).max(0.0).sqrt();
                    let e = integrate(
                        |phi| {
                            let (s, c) = phi.sin_cos();
                            f(&Vector::from_slice(&[r * u, rho * c, rho * s]))
                        },
                        0.0,
                        2.0 * PI,
                        &[PI],
                        rel_tol,
                        abs_tol / PI,
                        max_intervals,
                    );
                    evals += e.evaluations;
                    ok &= e.converged;
                    e.value
                },
                a,
                b,
                &[],
                rel_tol,
                abs_tol,
                max_intervals,
            );
            est.evaluations += evals;
            est.converged &= ok;
            est
        }
    }
}
