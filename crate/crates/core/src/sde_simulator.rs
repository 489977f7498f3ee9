//! Jump-adapted Euler simulation of `dX = b(X)dt + σ(X−)dZ` and of the
//! coupled pair driven through the three-branch thinning.
//!
//! The coupled state is kept as `(X, D)` with `D = X − Y`. Coalescence sets
//! `D = 0` exactly and the additive coalesce/reflect steps move `D` by
//! exactly `∓(D)_κ`, so sticking and distance bookkeeping hold bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficient_field::CoefficientField;
use crate::coupling_kernel::{clipped_difference, Branch, CouplingKernel};
use crate::error::{invalid, Error, Result};
use crate::levy_model::{JumpSampler, LevyModel};
use crate::linalg::Vector;
use crate::quadrature::QuadOptions;
use crate::stats::{self, MomentComparison, PermutationTest};

/// States beyond this norm are reported as divergence.
pub const DIVERGENCE_NORM: f64 = 1e15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt_max: f64,
    /// Jumps with `|z| ≤ trunc` are dropped and compensated.
    pub trunc: f64,
    /// `None` picks `1e-9·(1+|x0−y0|)`.
    #[serde(default)]
    pub coalesce_tol: Option<f64>,
    pub seed: u64,
    pub n_paths: usize,
    /// Records the first time `|X−Y| > ε` when set.
    #[serde(default)]
    pub exit_eps: Option<f64>,
}

impl SimConfig {
    pub fn new(horizon: f64, dt_max: f64, trunc: f64, seed: u64, n_paths: usize) -> Self {
        SimConfig { horizon, dt_max, trunc, coalesce_tol: None, seed, n_paths, exit_eps: None }
    }

    pub fn validate(&self, levy: &LevyModel) -> Result<()> {
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon={} must be finite and >= 0", self.horizon)));
        }
        if !(self.dt_max > 0.0) {
            return Err(invalid(format!("dt_max={} must be positive", self.dt_max)));
        }
        if !(self.trunc > 0.0 && self.trunc < levy.eta()) {
            return Err(invalid(format!("trunc={} must lie in (0, eta={})", self.trunc, levy.eta())));
        }
        if let Some(t) = self.coalesce_tol {
            if !(t >= 0.0) {
                return Err(invalid(format!("coalesce_tol={t} must be >= 0")));
            }
        }
        if let Some(e) = self.exit_eps {
            if !(e > 0.0) {
                return Err(invalid(format!("exit_eps={e} must be positive")));
            }
        }
        Ok(())
    }

    fn tolerance(&self, x0: &Vector, y0: &Vector) -> f64 {
        self.coalesce_tol.unwrap_or(1e-9 * (1.0 + (*x0 - *y0).norm()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarginalPath {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
}

/// One thinning decision, with the difference `D = X − Y` around it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub branch: Branch,
    pub d_before: Vector,
    pub d_after: Vector,
    pub kappa_clipped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoupledPath {
    pub times: Vec<f64>,
    pub x_states: Vec<Vector>,
    pub y_states: Vec<Vector>,
    /// `None` when the pair has not met by the horizon.
    pub coupling_time: Option<f64>,
    pub exit_time_eps: Option<f64>,
    /// Counts of Coalesce, Reflect and Synchronize decisions before coupling.
    pub branch_counts: [u64; 3],
    /// Filled only when event recording is requested.
    pub events: Vec<JumpEvent>,
}

/// Where a path is observed.
#[derive(Clone, Debug, PartialEq)]
pub enum Recording {
    /// Start, every jump, and the horizon.
    Jumps,
    /// Only at these increasing times in `[0, horizon]`.
    Grid(Vec<f64>),
}

fn branch_index(b: Branch) -> usize {
    match b {
        Branch::Coalesce => 0,
        Branch::Reflect => 1,
        Branch::Synchronize => 2,
    }
}

/// Shared per-ensemble state: the jump sampler of ν on `{|z|>δ}` and the
/// compensator drift of the dropped small jumps.
pub struct Simulator<'a> {
    kernel: Option<&'a CouplingKernel>,
    cf: &'a CoefficientField,
    sim: SimConfig,
    sampler: JumpSampler,
    comp: Vector,
    exp: Option<Exp<f64>>,
}

impl<'a> Simulator<'a> {
    pub fn marginal(cf: &'a CoefficientField, levy: &LevyModel, sim: &SimConfig) -> Result<Self> {
        Self::build(None, cf, levy.driving(), sim)
    }

    pub fn coupled(k: &'a CouplingKernel, sim: &SimConfig) -> Result<Self> {
        Self::build(Some(k), k.coeff(), k.driving(), sim)
    }

    fn build(kernel: Option<&'a CouplingKernel>, cf: &'a CoefficientField, nu: &LevyModel, sim: &SimConfig) -> Result<Self> {
        sim.validate(nu)?;
        if nu.dim() != cf.dim() {
            return Err(invalid(format!("levy dim {} != coefficient dim {}", nu.dim(), cf.dim())));
        }
        let sampler = JumpSampler::new(nu, sim.trunc)?;
        let comp = nu.compensator_drift(sim.trunc, &QuadOptions::default().with_rel_tol(1e-11))?;
        let exp = if sampler.rate() > 0.0 { Some(Exp::new(sampler.rate()).map_err(|e| invalid(e.to_string()))?) } else { None };
        Ok(Simulator { kernel, cf, sim: sim.clone(), sampler, comp, exp })
    }

    pub fn config(&self) -> &SimConfig {
        &self.sim
    }

    pub fn jump_rate(&self) -> f64 {
        self.sampler.rate()
    }

    /// Stream A (jumps of Z) and stream B (thinning uniforms) of a path.
    fn streams(&self, path: u64) -> (ChaCha8Rng, ChaCha8Rng) {
        let mut a = ChaCha8Rng::seed_from_u64(self.sim.seed);
        a.set_stream(path << 1);
        let mut b = ChaCha8Rng::seed_from_u64(self.sim.seed);
        b.set_stream((path << 1) | 1);
        (a, b)
    }

    fn drift(&self, x: &Vector) -> Vector {
        self.cf.b(x) + self.cf.sigma(x).mul_vec(&self.comp)
    }

    fn next_arrival(&self, t: f64, rng: &mut ChaCha8Rng) -> f64 {
        match &self.exp {
            Some(e) => t + e.sample(rng),
            None => f64::INFINITY,
        }
    }

    fn check(x: &Vector, t: f64) -> Result<()> {
        let n = x.norm();
        if !(n <= DIVERGENCE_NORM) {
            return Err(Error::Divergence { time: t, norm: n });
        }
        Ok(())
    }

    /// One marginal path, index `path` of the ensemble.
    pub fn marginal_path(&self, x0: &Vector, path: u64, rec: &Recording) -> Result<MarginalPath> {
        let (mut ra, _) = self.streams(path);
        let horizon = self.sim.horizon;
        let grid = grid_times(rec, horizon)?;
        let mut out = MarginalPath { times: vec![0.0], states: vec![*x0] };
        let mut gi = skip_zero(&grid);
        let mut x = *x0;
        let mut t = 0.0;
        let mut next_jump = self.next_arrival(0.0, &mut ra);
        loop {
            let stop = next_jump.min(horizon).min(grid.get(gi).copied().unwrap_or(f64::INFINITY));
            while t < stop {
                let h = (stop - t).min(self.sim.dt_max);
                let drift = self.drift(&x);
                x += drift.scale(h);
                t = if stop - t <= self.sim.dt_max { stop } else { t + h };
                Self::check(&x, t)?;
            }
            if gi < grid.len() && t == grid[gi] {
                out.times.push(t);
                out.states.push(x);
                gi += 1;
            }
            if t >= horizon {
                break;
            }
            if t == next_jump {
                let z = self.sampler.sample_size(&mut ra);
                x += self.cf.sigma(&x).mul_vec(&z);
                Self::check(&x, t)?;
                if matches!(rec, Recording::Jumps) {
                    out.times.push(t);
                    out.states.push(x);
                }
                next_jump = self.next_arrival(t, &mut ra);
            }
        }
        if matches!(rec, Recording::Jumps) && *out.times.last().unwrap() < horizon {
            out.times.push(horizon);
            out.states.push(x);
        }
        Ok(out)
    }

    /// One coupled path. X is bit-identical to `marginal_path` with the same
    /// index and recording, since the thinning draws from its own stream.
    pub fn coupled_path(&self, x0: &Vector, y0: &Vector, path: u64, rec: &Recording, record_events: bool) -> Result<CoupledPath> {
        let k = self.kernel.ok_or_else(|| Error::Precondition("coupled_path needs a coupling kernel".into()))?;
        let (mut ra, mut rb) = self.streams(path);
        let horizon = self.sim.horizon;
        let grid = grid_times(rec, horizon)?;
        let tol = self.sim.tolerance(x0, y0);
        let kappa = k.kappa();
        let additive = self.cf.is_additive();

        let mut x = *x0;
        let mut d = *x0 - *y0;
        let mut t = 0.0;
        let mut coupling_time = None;
        let mut exit_time = None;
        if d.norm() <= tol {
            d = Vector::zeros(x.dim());
            coupling_time = Some(0.0);
        }
        if let Some(eps) = self.sim.exit_eps {
            if d.norm() > eps {
                exit_time = Some(0.0);
            }
        }
        let mut out = CoupledPath {
            times: vec![0.0],
            x_states: vec![*x0],
            y_states: vec![x - d],
            coupling_time,
            exit_time_eps: exit_time,
            branch_counts: [0; 3],
            events: Vec::new(),
        };
        let mut gi = skip_zero(&grid);
        let mut next_jump = self.next_arrival(0.0, &mut ra);

        let settle = |d: &mut Vector, t: f64, out: &mut CoupledPath| {
            if out.coupling_time.is_none() && d.norm() <= tol {
                *d = Vector::zeros(d.dim());
                out.coupling_time = Some(t);
            }
            if out.exit_time_eps.is_none() {
                if let Some(eps) = self.sim.exit_eps {
                    if d.norm() > eps {
                        out.exit_time_eps = Some(t);
                    }
                }
            }
        };

        loop {
            let stop = next_jump.min(horizon).min(grid.get(gi).copied().unwrap_or(f64::INFINITY));
            while t < stop {
                let h = (stop - t).min(self.sim.dt_max);
                let bx = self.drift(&x);
                if out.coupling_time.is_none() {
                    let by = self.drift(&(x - d));
                    d += (bx - by).scale(h);
                }
                x += bx.scale(h);
                t = if stop - t <= self.sim.dt_max { stop } else { t + h };
                Self::check(&x, t)?;
                Self::check(&(x - d), t)?;
                settle(&mut d, t, &mut out);
            }
            if gi < grid.len() && t == grid[gi] {
                out.times.push(t);
                out.x_states.push(x);
                out.y_states.push(x - d);
                gi += 1;
            }
            if t >= horizon {
                break;
            }
            if t == next_jump {
                let z = self.sampler.sample_size(&mut ra);
                let sx = self.cf.sigma(&x);
                let xz = sx.mul_vec(&z);
                if out.coupling_time.is_none() {
                    let y = x - d;
                    let pm = k.pair(&x, &y)?;
                    let u: f64 = rb.random();
                    let dec = pm.decide(&z, u)?;
                    let before = d;
                    let clipped = d.norm() > kappa;
                    // (x−y)_κ from the tracked D rather than from x − (x − D)
                    let dk = clipped_difference(&d, &Vector::zeros(d.dim()), kappa);
                    d = match dec.branch {
                        Branch::Coalesce if !clipped => Vector::zeros(d.dim()),
                        // σ(y)Ψ(z) = σ(x)z + (x−y)_κ
                        Branch::Coalesce => d - dk,
                        Branch::Reflect if additive => d + dk,
                        Branch::Reflect => d + xz - pm.sigma_y.mul_vec(&pm.psi_inverse(&z)),
                        Branch::Synchronize if additive => d,
                        Branch::Synchronize => d + xz - pm.sigma_y.mul_vec(&z),
                    };
                    out.branch_counts[branch_index(dec.branch)] += 1;
                    if record_events {
                        out.events.push(JumpEvent { time: t, branch: dec.branch, d_before: before, d_after: d, kappa_clipped: clipped });
                    }
                }
                x += xz;
                Self::check(&x, t)?;
                Self::check(&(x - d), t)?;
                if out.coupling_time.is_none() && d.is_zero() {
                    out.coupling_time = Some(t);
                }
                settle(&mut d, t, &mut out);
                if matches!(rec, Recording::Jumps) {
                    out.times.push(t);
                    out.x_states.push(x);
                    out.y_states.push(x - d);
                }
                next_jump = self.next_arrival(t, &mut ra);
            }
        }
        if matches!(rec, Recording::Jumps) && *out.times.last().unwrap() < horizon {
            out.times.push(horizon);
            out.x_states.push(x);
            out.y_states.push(x - d);
        }
        Ok(out)
    }
}

fn grid_times(rec: &Recording, horizon: f64) -> Result<Vec<f64>> {
    match rec {
        Recording::Jumps => Ok(Vec::new()),
        Recording::Grid(g) => {
            if g.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
                return Err(invalid("recording grid must be increasing inside [0, horizon]"));
            }
            Ok(g.clone())
        }
    }
}

fn skip_zero(grid: &[f64]) -> usize {
    usize::from(grid.first() == Some(&0.0))
}

/// Path 0 of the marginal dynamics, recorded at every jump.
pub fn simulate_marginal(cf: &CoefficientField, levy: &LevyModel, x0: &Vector, sim: &SimConfig) -> Result<MarginalPath> {
    Simulator::marginal(cf, levy, sim)?.marginal_path(x0, 0, &Recording::Jumps)
}

/// Path 0 of the coupled dynamics, recorded at every jump.
pub fn simulate_coupled(k: &CouplingKernel, x0: &Vector, y0: &Vector, sim: &SimConfig) -> Result<CoupledPath> {
    Simulator::coupled(k, sim)?.coupled_path(x0, y0, 0, &Recording::Jumps, false)
}

/// Terminal states of `n_paths` marginal paths starting at `x0`, with path
/// indices offset by `first_path`.
pub fn marginal_ensemble(cf: &CoefficientField, levy: &LevyModel, x0: &Vector, sim: &SimConfig, first_path: u64) -> Result<Vec<Vector>> {
    let s = Simulator::marginal(cf, levy, sim)?;
    let rec = Recording::Grid(vec![sim.horizon]);
    (0..sim.n_paths as u64).into_par_iter().map(|p| s.marginal_path(x0, first_path + p, &rec).map(|m| *m.states.last().unwrap())).collect()
}

#[derive(Clone, Debug)]
pub struct LawReport {
    /// Per coordinate comparison of coupled Y against independent copies.
    pub moments: Vec<MomentComparison>,
    /// Whether the moments were taken of `y/√(1+y²)` because ν has heavy
    /// tails.
    pub bounded_transform: bool,
    pub energy: PermutationTest,
    pub energy_sample: usize,
    pub sigmas: f64,
    pub passed: bool,
}

/// Compares the law of `Y_horizon` from the coupled system with that of
/// independent marginal paths started at `y0` (path indices disjoint from
/// the coupled ones).
pub fn marginal_law_consistency(k: &CouplingKernel, x0: &Vector, y0: &Vector, sim: &SimConfig) -> Result<LawReport> {
    if sim.n_paths < 10_000 {
        return Err(Error::Precondition(format!("marginal_law_consistency needs n_paths >= 10^4, got {}", sim.n_paths)));
    }
    let s = Simulator::coupled(k, sim)?;
    let rec = Recording::Grid(vec![sim.horizon]);
    let n = sim.n_paths as u64;
    let coupled: Result<Vec<Vector>> =
        (0..n).into_par_iter().map(|p| s.coupled_path(x0, y0, p, &rec, false).map(|c| *c.y_states.last().unwrap())).collect();
    let coupled = coupled?;
    let indep = marginal_ensemble(k.coeff(), k.levy(), y0, sim, n)?;

    let bounded_transform = k.driving().support_radius().is_none();
    let dim = x0.dim();
    let coord = |v: &[Vector], i: usize| -> Vec<f64> {
        v.iter().map(|p| if bounded_transform { p[i] / (1.0 + p[i] * p[i]).sqrt() } else { p[i] }).collect()
    };
    let moments: Vec<MomentComparison> = (0..dim).map(|i| stats::compare_moments(&coord(&coupled, i), &coord(&indep, i))).collect();

    // The pooled distance matrix is quadratic, so d ≥ 2 uses a subsample.
    let m = if dim == 1 { coupled.len() } else { coupled.len().min(1500) };
    let energy = stats::energy_test(&coupled[..m], &indep[..m], 200, sim.seed ^ 0x5eed)?;
    let sigmas = 4.0;
    let passed = moments.iter().all(|c| c.within(sigmas)) && energy.z <= sigmas;
    Ok(LawReport { moments, bounded_transform, energy, energy_sample: m, sigmas, passed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalCurve {
    pub times: Vec<f64>,
    /// Empirical `P(T > t)`.
    pub survival: Vec<f64>,
    pub ci_lo: Vec<f64>,
    pub ci_hi: Vec<f64>,
    /// Empirical `E|X_t − Y_t|` and its standard error.
    pub mean_dist: Vec<f64>,
    pub mean_dist_se: Vec<f64>,
    pub coupling_times: Vec<Option<f64>>,
    pub exit_times: Vec<Option<f64>>,
    pub n_paths: usize,
}

/// Survival function of the coupling time on `grid` with 95% Wilson bands,
/// and the mean distance along the same grid.
pub fn coupling_time_ensemble(k: &CouplingKernel, x0: &Vector, y0: &Vector, sim: &SimConfig, grid: &[f64]) -> Result<SurvivalCurve> {
    if sim.n_paths < 1000 {
        return Err(Error::Precondition(format!("coupling_time_ensemble needs n_paths >= 10^3, got {}", sim.n_paths)));
    }
    let s = Simulator::coupled(k, sim)?;
    let mut g: Vec<f64> = grid.to_vec();
    if g.first() != Some(&0.0) {
        g.insert(0, 0.0);
    }
    let rec = Recording::Grid(g.clone());
    let paths: Result<Vec<CoupledPath>> = (0..sim.n_paths as u64).into_par_iter().map(|p| s.coupled_path(x0, y0, p, &rec, false)).collect();
    let paths = paths?;
    let n = paths.len();
    let mut out = SurvivalCurve {
        times: Vec::with_capacity(g.len()),
        survival: Vec::new(),
        ci_lo: Vec::new(),
        ci_hi: Vec::new(),
        mean_dist: Vec::new(),
        mean_dist_se: Vec::new(),
        coupling_times: paths.iter().map(|p| p.coupling_time).collect(),
        exit_times: paths.iter().map(|p| p.exit_time_eps).collect(),
        n_paths: n,
    };
    for (j, &t) in g.iter().enumerate() {
        let alive = paths.iter().filter(|p| p.coupling_time.is_none_or(|tc| tc > t)).count();
        let (lo, hi) = stats::wilson_interval(alive, n, 1.96);
        let dists: Vec<f64> = paths.iter().map(|p| (p.x_states[j] - p.y_states[j]).norm()).collect();
        let (m, v) = stats::mean_var(&dists);
        out.times.push(t);
        out.survival.push(alive as f64 / n as f64);
        out.ci_lo.push(lo);
        out.ci_hi.push(hi);
        out.mean_dist.push(m);
        out.mean_dist_se.push((v / n as f64).sqrt());
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFrequencies {
    pub n_jumps: u64,
    pub counts: [u64; 3],
    /// Expected probabilities of Coalesce and Reflect per jump.
    pub expected: [f64; 2],
    /// Standardized deviations of the two observed frequencies.
    pub z: [f64; 2],
}

/// Branch frequencies at a frozen pair `(x, y)` over `n_jumps` draws of
/// `z ~ ν|_{|z|>δ}`, against `½μ_Ψ(|z|>δ)/ν(|z|>δ)` and its reflected twin.
pub fn branch_frequencies(k: &CouplingKernel, x: &Vector, y: &Vector, delta: f64, n_jumps: u64, seed: u64) -> Result<BranchFrequencies> {
    let pm = k.pair(x, y)?;
    let sampler = JumpSampler::new(k.driving(), delta)?;
    let mut ra = ChaCha8Rng::seed_from_u64(seed);
    let mut rb = ChaCha8Rng::seed_from_u64(seed);
    rb.set_stream(1);
    let mut counts = [0u64; 3];
    for _ in 0..n_jumps {
        let z = sampler.sample_size(&mut ra);
        let dec = pm.decide(&z, rb.random())?;
        counts[branch_index(dec.branch)] += 1;
    }
    let opts = QuadOptions::default();
    let mut expected = [0.0; 2];
    if !pm.is_identity() {
        for (i, b) in [Branch::Coalesce, Branch::Reflect].into_iter().enumerate() {
            let e = pm.mu_integral(b, |_| 1.0, delta, f64::INFINITY, &opts).require(&opts, 10.0, "branch mass")?;
            expected[i] = 0.5 * e.value / sampler.rate();
        }
    }
    let nf = n_jumps as f64;
    let mut z = [0.0; 2];
    for i in 0..2 {
        let p = expected[i];
        let se = (p * (1.0 - p) / nf).sqrt();
        let d = counts[i] as f64 / nf - p;
        z[i] = if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    Ok(BranchFrequencies { n_jumps, counts, expected, z })
}
