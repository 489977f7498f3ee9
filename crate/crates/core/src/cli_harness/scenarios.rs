//! The scenario bodies. Each takes fully built objects so that single
//! scenarios (driven by the config's model) and the full suite (driven by
//! built-in presets) share the same code.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, Scenario};
use super::{num, Check, Section, Table};
use crate::coefficient_field::{CoefficientField, Diffusion, DissipativityProfile, Drift};
use crate::coupling_kernel::{pushforward_identity_check, Branch, CouplingKernel};
use crate::error::{Error, Result};
use crate::generator_quadrature::{drift_bound_check, marginality_suite};
use crate::grid::{direction, lin_space, log_space, log_spaced_pairs};
use crate::levy_model::{LevyModel, SupportVariant};
use crate::linalg::Vector;
use crate::quadrature::QuadOptions;
use crate::rate_analysis::{
    contraction_certificate, estimate_j_k, gradient_rate_certificate, invariant_measure_probe, lyapunov_check, tv_and_w1_report,
    CertOptions, ConcChoice, RateCertificate,
};
use crate::sde_simulator::{coupling_time_ensemble, marginal_law_consistency, Recording, SimConfig, Simulator};
use crate::stats::linear_fit;
use crate::test_functions::{CosWave, GaussianBump, LogCorrected, PowerCapped, RadialFn, SharedFn};

fn vec_cells(v: &Vector) -> Vec<String> {
    v.as_slice().iter().map(|&c| num(c)).collect()
}

fn coord_header(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}{i}")).collect()
}

fn table_with_coords(name: String, lead: &[&str], coords: &[(&str, usize)], tail: &[&str]) -> Table {
    let mut header: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    for &(p, d) in coords {
        header.extend(coord_header(p, d));
    }
    header.extend(tail.iter().map(|s| s.to_string()));
    Table { name, header, rows: Vec::new() }
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }
    fn check(&self, id: &str, name: &str, passed: bool, detail: String, budget: Option<f64>) -> Check {
        Check { id: id.into(), name: name.into(), passed, detail, elapsed_secs: self.0.elapsed().as_secs_f64(), budget_secs: budget }
    }
}

/// Prefix for table names: the criterion id in the suite, the scenario name
/// otherwise.
fn tname(prefix: &str, what: &str) -> String {
    if prefix.is_empty() {
        what.to_string()
    } else {
        format!("{prefix}_{what}")
    }
}

fn function_pairs(dim: usize) -> Vec<(SharedFn, SharedFn)> {
    let v = |a: f64, b: f64| {
        let mut out = Vector::zeros(dim);
        out[0] = a;
        if dim > 1 {
            out[1] = b;
        }
        out
    };
    vec![
        (
            Arc::new(GaussianBump { center: v(0.2, 0.1), width: 0.7, height: 1.0 }),
            Arc::new(CosWave { k: v(1.0, 0.5), phase: 0.3, amp: 1.0 }),
        ),
        (
            Arc::new(CosWave { k: v(-0.7, 1.3), phase: -0.4, amp: 0.8 }),
            Arc::new(GaussianBump { center: v(-0.5, 0.4), width: 1.2, height: 2.0 }),
        ),
        (
            Arc::new(GaussianBump { center: v(1.0, -1.0), width: 0.4, height: -1.5 }),
            Arc::new(GaussianBump { center: v(-0.3, 0.0), width: 2.0, height: 1.0 }),
        ),
    ]
}

/// Deterministic pairs with distances log-spaced in `[0.01, 3]`, anchored
/// in `[-2, 2]^d`.
fn test_pairs(dim: usize, n: usize) -> Vec<(Vector, Vector)> {
    log_spaced_pairs(dim, n, 0.01, 3.0, -2.0, 2.0)
}

pub(super) fn marginality(prefix: &str, id: &str, k: &CouplingKernel, n_pairs: usize, opts: &QuadOptions) -> Result<Section> {
    let timer = Timer::start();
    let dim = k.dim();
    let points = test_pairs(dim, n_pairs);
    let mut t = table_with_coords(
        tname(prefix, "marginality"),
        &["pair"],
        &[("x", dim), ("y", dim)],
        &["f", "g", "coupled", "lf", "lg", "rel_error"],
    );
    let mut worst: f64 = 0.0;
    for (f, g) in function_pairs(dim) {
        let rep = marginality_suite(k, &[f], &[g], &points, opts)?;
        for (i, r) in rep.rows.iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(vec_cells(&r.x));
            row.extend(vec_cells(&r.y));
            row.extend([r.f.clone(), r.g.clone(), num(r.coupled), num(r.lf), num(r.lg), num(r.error)]);
            t.push(row);
        }
        worst = worst.max(rep.max_error);
    }
    let passed = worst <= 1e-3 && points.len() >= 20;
    let detail = format!("{} pairs x 3 function pairs, d={dim}, max relative error {worst:.3e} (<= 1e-3)", points.len());
    Ok(Section { tables: vec![t], checks: vec![timer.check(id, "marginality", passed, detail, None)] })
}

pub(super) fn pushforward(prefix: &str, id: &str, k: &CouplingKernel, n_pairs: usize, opts: &QuadOptions) -> Result<Section> {
    // the 1e-6 mass gap needs the masses well below that
    let mass_opts = opts.with_rel_tol(opts.rel_tol.min(1e-9));
    let timer = Timer::start();
    let dim = k.dim();
    let points = log_spaced_pairs(dim, n_pairs, 0.02, 2.0 * k.kappa(), -1.0, 1.0);
    let h1 = |z: &Vector| (-z.norm_sq()).exp();
    let h2 = |z: &Vector| (1.3 * z[0] + 0.2).cos();
    let h3 = |z: &Vector| 1.0 / (1.0 + (z.norm() - 0.3).powi(2));
    let fns: [&(dyn Fn(&Vector) -> f64 + Sync); 3] = [&h1, &h2, &h3];
    let rows: Result<Vec<(f64, f64, f64)>> = points
        .par_iter()
        .map(|(x, y)| {
            let pm = k.pair(x, y)?;
            let disc = pushforward_identity_check(&pm, &fns, opts)?;
            let a = pm.mu_mass(&mass_opts)?.value;
            let b = pm.mu_inverse_mass(&mass_opts)?.value;
            Ok((disc, a, b))
        })
        .collect();
    let rows = rows?;
    let mut t = table_with_coords(
        tname(prefix, "pushforward"),
        &["pair"],
        &[("x", dim), ("y", dim)],
        &["discrepancy", "mass", "inverse_mass", "mass_rel_gap"],
    );
    let (mut worst, mut worst_mass) = (0.0f64, 0.0f64);
    for (i, ((x, y), (d, a, b))) in points.iter().zip(&rows).enumerate() {
        let gap = (a - b).abs() / a.abs().max(b.abs());
        worst = worst.max(*d);
        worst_mass = worst_mass.max(gap);
        let mut row = vec![i.to_string()];
        row.extend(vec_cells(x));
        row.extend(vec_cells(y));
        row.extend([num(*d), num(*a), num(*b), num(gap)]);
        t.push(row);
    }
    let passed = worst <= 1e-3 && worst_mass <= 1e-6;
    let detail =
        format!("{} pairs x 3 functions, d={dim}: discrepancy {worst:.3e} (<= 1e-3), mass gap {worst_mass:.3e} (<= 1e-6)", points.len());
    Ok(Section { tables: vec![t], checks: vec![timer.check(id, "pushforward identity", passed, detail, None)] })
}

pub(super) fn drift_bound(prefix: &str, id: &str, k: &CouplingKernel, n_pairs: usize, opts: &QuadOptions) -> Result<Section> {
    let timer = Timer::start();
    let dim = k.dim();
    let points = log_spaced_pairs(dim, n_pairs, 1e-3, 3.0, -3.0, 3.0);
    let fns: Vec<Box<dyn RadialFn>> = vec![Box::new(PowerCapped::new(0.5, 2.0)?), Box::new(LogCorrected::with_default_cutoff(1.0)?)];
    let infinite_ok = k.driving().moment_integrals(opts)?.big_first_finite;
    let mut radii = vec![Some(2.0)];
    if infinite_ok {
        radii.push(None);
    }
    let (nf, nr) = (fns.len(), radii.len());
    let jobs: Vec<(usize, usize, usize)> =
        (0..points.len()).flat_map(|p| (0..nf).flat_map(move |f| (0..nr).map(move |r| (p, f, r)))).collect();
    let reps: Result<Vec<_>> =
        jobs.par_iter().map(|&(p, f, r)| drift_bound_check(k, fns[f].as_ref(), &points[p].0, &points[p].1, radii[r], opts)).collect();
    let reps = reps?;
    let mut t = table_with_coords(
        tname(prefix, "drift_bound"),
        &["pair"],
        &[("x", dim), ("y", dim)],
        &["function", "radius", "lhs", "rhs", "slack", "residual"],
    );
    let mut worst = f64::INFINITY;
    for (&(p, f, r), rep) in jobs.iter().zip(&reps) {
        let mut row = vec![p.to_string()];
        row.extend(vec_cells(&points[p].0));
        row.extend(vec_cells(&points[p].1));
        let radius = radii[r].map_or("inf".to_string(), num);
        row.extend([fns[f].name(), radius, num(rep.lhs), num(rep.rhs), num(rep.slack), num(rep.residual)]);
        t.push(row);
        worst = worst.min(rep.slack);
    }
    let passed = worst >= -1e-6;
    let rs = if infinite_ok { "R in {2, inf}" } else { "R = 2 (big-jump first moment infinite)" };
    let detail = format!("{} pairs x 2 radial functions, d={dim}, {rs}: min slack {worst:.3e} (>= -1e-6)", points.len());
    Ok(Section { tables: vec![t], checks: vec![timer.check(id, "drift bound", passed, detail, None)] })
}

/// Runs coupled paths with events recorded until `min_events` events with
/// `D ≠ 0` before the jump are collected.
fn collect_events(
    k: &CouplingKernel,
    x0: &Vector,
    y0: &Vector,
    sim: &SimConfig,
    min_events: usize,
) -> Result<Vec<crate::sde_simulator::JumpEvent>> {
    let s = Simulator::coupled(k, sim)?;
    let mut out = Vec::new();
    let mut path = 0u64;
    while out.len() < min_events {
        let batch: Result<Vec<_>> = (path..path + 64).into_par_iter().map(|p| s.coupled_path(x0, y0, p, &Recording::Jumps, true)).collect();
        for p in batch? {
            out.extend(p.events);
        }
        path += 64;
        if path > 1_000_000 {
            return Err(Error::Precondition("too few jump events collected".into()));
        }
    }
    Ok(out)
}

/// Bit-level branch bookkeeping. The expected values are computed here from
/// `D` alone (`κ·sign(D)` in one dimension), not through the kernel.
pub(super) fn coalescence(
    prefix: &str,
    id: &str,
    near: &CouplingKernel,
    far: &CouplingKernel,
    seed: u64,
    budget: Option<f64>,
) -> Result<Section> {
    let timer = Timer::start();
    let mut t = Table::new(tname(prefix, "coalescence"), &["case", "branch", "events", "exact", "violations"]);
    let mut ok = true;
    let mut detail = Vec::new();

    // near: start inside κ, every coalesce from |D| ≤ κ must land on D = 0
    let kappa = near.kappa();
    let sim = SimConfig::new(1.0, 0.01, 1e-3, seed, 64);
    let dim = near.dim();
    let x0 = Vector::splat(dim, 0.2);
    let y0 = x0 + direction(dim, 1).scale(0.6 * kappa);
    let ev = collect_events(near, &x0, &y0, &sim, 10_000)?;
    let mut counts = [(0usize, 0usize); 2];
    for e in &ev {
        let dn = e.d_before.norm();
        if e.branch == Branch::Coalesce && dn > 0.0 && dn <= kappa {
            counts[0].0 += 1;
            counts[0].1 += usize::from(!e.d_after.is_zero());
        }
        if dn == 0.0 {
            counts[1].0 += 1;
            counts[1].1 += usize::from(!e.d_after.is_zero());
        }
    }
    let cases = [("near_coalesce", "coalesce"), ("after_coupling", "any")];
    for (c, &(n, bad)) in cases.iter().zip(&counts) {
        t.push(vec![c.0.into(), c.1.into(), ev.len().to_string(), n.to_string(), bad.to_string()]);
        ok &= bad == 0;
    }
    ok &= ev.len() >= 10_000 && counts[0].0 > 0;
    detail.push(format!(
        "{} events (d={dim}), {} coalescences from |D|<=kappa, {} violations",
        ev.len(),
        counts[0].0,
        counts[0].1 + counts[1].1
    ));

    // far, additive 1-d: |D| > κ moves by exactly ∓κ
    if !far.coeff().is_additive() || far.dim() != 1 {
        return Err(Error::Precondition("the far-field case needs the additive one-dimensional preset".into()));
    }
    let kf = far.kappa();
    let x0 = Vector::from_slice(&[3.0 * kf]);
    let y0 = Vector::from_slice(&[-3.0 * kf]);
    let ev = collect_events(far, &x0, &y0, &SimConfig::new(1.0, 0.01, 1e-3, seed ^ 0x5eed, 64), 10_000)?;
    let mut per = [(0usize, 0usize); 3];
    for e in &ev {
        let d = e.d_before[0];
        if d.abs() <= kf {
            continue;
        }
        let step = kf.copysign(d);
        let (slot, want) = match e.branch {
            Branch::Coalesce => (0, d - step),
            Branch::Reflect => (1, d + step),
            Branch::Synchronize => (2, d),
        };
        per[slot].0 += 1;
        let exact = e.d_after[0].to_bits() == want.to_bits();
        let dist_change = e.d_after[0].abs() - d.abs();
        let expect_change = [-kf, kf, 0.0][slot];
        let close = (dist_change - expect_change).abs() <= 1e-12 * (1.0 + d.abs());
        per[slot].1 += usize::from(!(exact && close));
    }
    let n_far: usize = per.iter().map(|p| p.0).sum();
    for (name, &(n, bad)) in ["coalesce", "reflect", "synchronize"].iter().zip(&per) {
        t.push(vec!["far_additive".into(), name.to_string(), ev.len().to_string(), n.to_string(), bad.to_string()]);
        ok &= bad == 0;
    }
    ok &= n_far >= 10_000 && per[0].0 > 0 && per[1].0 > 0;
    detail.push(format!(
        "{n_far} far-field events, coalesce {} / reflect {}, {} violations",
        per[0].0,
        per[1].0,
        per.iter().map(|p| p.1).sum::<usize>()
    ));
    Ok(Section { tables: vec![t], checks: vec![timer.check(id, "coalescence mechanics", ok, detail.join("; "), budget)] })
}

pub(super) fn marginal_law(
    prefix: &str,
    id: &str,
    label: &str,
    k: &CouplingKernel,
    x0: &Vector,
    y0: &Vector,
    sim: &SimConfig,
) -> Result<Section> {
    let timer = Timer::start();
    let rep = marginal_law_consistency(k, x0, y0, sim)?;
    let mut t = Table::new(tname(prefix, &format!("marginal_law_{label}")), &["quantity", "coupled", "independent", "z"]);
    for (i, m) in rep.moments.iter().enumerate() {
        t.push(vec![format!("mean_{}", i + 1), num(m.mean_a), num(m.mean_b), num(m.mean_z)]);
        t.push(vec![format!("var_{}", i + 1), num(m.var_a), num(m.var_b), num(m.var_z)]);
    }
    t.push(vec!["energy".into(), num(rep.energy.statistic), num(rep.energy.null_mean), num(rep.energy.z)]);
    let worst = rep.moments.iter().map(|m| m.mean_z.abs().max(m.var_z.abs())).fold(rep.energy.z, f64::max);
    let detail = format!(
        "{label}: n={}, d={}, worst |z| {worst:.2} (<= 4){}",
        sim.n_paths,
        k.dim(),
        if rep.bounded_transform { ", moments of y/sqrt(1+y^2)" } else { "" }
    );
    Ok(Section { tables: vec![t], checks: vec![timer.check(id, &format!("marginal law ({label})"), rep.passed, detail, None)] })
}

pub(super) fn j_exponent(
    prefix: &str,
    id: &str,
    label: &str,
    k: &CouplingKernel,
    radii: &[f64],
    samples: usize,
    opts: &QuadOptions,
) -> Result<Section> {
    let timer = Timer::start();
    let c = estimate_j_k(k, radii, samples, opts)?;
    let mut t = Table::new(tname(prefix, &format!("j_curve_{label}")), &["radius", "j", "k"]);
    for i in 0..c.radii.len() {
        t.push(vec![num(c.radii[i]), num(c.j[i]), num(c.k[i])]);
    }
    let alpha = k.levy().alpha();
    let gap = (c.exponent() + alpha).abs();
    let detail = format!("{label}: slope {:.4} vs -alpha={:.2} (|gap| {gap:.3} <= 0.15), r2 {:.4}", c.exponent(), -alpha, c.j_fit.r2);
    Ok(Section { tables: vec![t], checks: vec![timer.check(id, &format!("J exponent ({label})"), gap <= 0.15, detail, None)] })
}

fn certificate_table(name: String, cert: &std::result::Result<RateCertificate, Error>) -> Table {
    let mut t = Table::new(name, &["quantity", "value"]);
    match cert {
        Ok(c) => {
            for (q, v) in [
                ("K1", c.profile.k1),
                ("K2", c.profile.k2),
                ("l0", c.profile.l0),
                ("beta", c.profile.beta),
                ("A1_sampled", c.a1),
                ("A1_pair_distance_lo", c.a1_range.0),
                ("A1_pair_distance_hi", c.a1_range.1),
                ("A2", c.a2),
                ("K2_effective", c.k2_eff),
                ("sigma_conc_c", c.sigma_conc.c),
                ("sigma_conc_p", c.sigma_conc.p),
                ("conc_margin", c.conc_margin),
                ("g1_2l0", c.g1_end),
                ("g2_2l0", c.g2_end),
                ("g_2l0", c.g_end),
                ("c1", c.c1),
                ("c2", c.c2),
                ("lambda", c.lambda),
                ("C", c.big_c),
                ("j_exponent", c.curves.exponent()),
            ] {
                t.push(vec![q.into(), num(v)]);
            }
        }
        Err(e) => t.push(vec!["unavailable".into(), format!("\"{}\"", e.to_string().replace('"', "'"))]),
    }
    t
}

fn decay_grid() -> Vec<f64> {
    lin_space(0.5, 10.0, 20)
}

/// E|X_t − Y_t| decay; the certificate comes from the drift's default
/// dissipativity profile.
pub(super) fn coupling_decay(
    prefix: &str,
    id: &str,
    k: &CouplingKernel,
    x0: &Vector,
    y0: &Vector,
    sim: &SimConfig,
    window: (f64, f64),
    budget: Option<f64>,
) -> Result<Section> {
    let timer = Timer::start();
    let grid: Vec<f64> = decay_grid().into_iter().filter(|&t| t <= sim.horizon).collect();
    let rep = tv_and_w1_report(k, x0, y0, sim, &grid, window)?;
    let cert = match k.coeff().drift().default_profile(k.dim()) {
        Some(p) => contraction_certificate(k, &p, ConcChoice::Auto, &CertOptions::default()),
        None => Err(Error::CertificateUnavailable("the drift has no dissipativity profile".into())),
    };
    let mut t = Table::new(tname(prefix, "w1_decay"), &["t", "w1_upper", "w1_lo", "w1_hi", "w1_exact", "tv_upper", "tv_lo", "tv_hi"]);
    for (i, &time) in rep.curve.times.iter().enumerate() {
        let exact = rep.w1_exact.as_ref().map_or(String::new(), |w| num(w[i]));
        t.push(vec![
            num(time),
            num(rep.w1_upper[i]),
            num(rep.w1_band[i].0),
            num(rep.w1_band[i].1),
            exact,
            num(rep.tv_upper[i]),
            num(rep.tv_band[i].0),
            num(rep.tv_band[i].1),
        ]);
    }
    let mut fits = Table::new(tname(prefix, "w1_fit"), &["curve", "rate", "intercept", "r2", "points"]);
    for (n, f) in [("w1", rep.fit_w1), ("tv", rep.fit_tv)] {
        match f {
            Some(f) => fits.push(vec![n.into(), num(f.rate), num(f.intercept), num(f.r2), f.n.to_string()]),
            None => fits.push(vec![n.into(), String::new(), String::new(), String::new(), "0".into()]),
        }
    }
    let (passed, detail) = if x0 == y0 {
        let zero = rep.w1_upper.iter().chain(&rep.tv_upper).all(|&v| v == 0.0);
        (zero, format!("x0 = y0: all curves zero: {zero}"))
    } else {
        match (&rep.fit_w1, &cert) {
            (Some(f), Ok(c)) => {
                let ok = f.rate > 0.0 && f.r2 >= 0.95 && f.rate >= 0.8 * c.lambda;
                (ok, format!("rate {:.4}, r2 {:.5} (>= 0.95), certificate lambda {:.3e} (rate >= 0.8 lambda)", f.rate, f.r2, c.lambda))
            }
            (None, _) => (false, format!("fewer than 3 positive points of E|X-Y| on [{}, {}]", window.0, window.1)),
            (Some(f), Err(e)) => (false, format!("rate {:.4}, r2 {:.5}; certificate unavailable: {e}", f.rate, f.r2)),
        }
    };
    let tables = vec![t, fits, certificate_table(tname(prefix, "certificate"), &cert)];
    Ok(Section { tables, checks: vec![timer.check(id, "W1 decay", passed, detail, budget)] })
}

pub(super) fn tv_decay(
    prefix: &str,
    id: &str,
    label: &str,
    k: &CouplingKernel,
    x0: &Vector,
    y0: &Vector,
    sim: &SimConfig,
    window: (f64, f64),
) -> Result<Section> {
    let timer = Timer::start();
    let grid: Vec<f64> = decay_grid().into_iter().filter(|&t| t <= sim.horizon).collect();
    let curve = coupling_time_ensemble(k, x0, y0, sim, &grid)?;
    let tv: Vec<f64> = curve.survival.iter().map(|s| 2.0 * s).collect();
    let mut t = Table::new(tname(prefix, &format!("tv_decay_{label}")), &["t", "tv_upper", "tv_lo", "tv_hi"]);
    for i in 0..curve.times.len() {
        t.push(vec![num(curve.times[i]), num(tv[i]), num(2.0 * curve.ci_lo[i]), num(2.0 * curve.ci_hi[i])]);
    }
    let (pt, pv): (Vec<f64>, Vec<f64>) = curve.times.iter().zip(&tv).filter(|(_, &v)| v > 0.0).map(|(&a, &b)| (a, b)).unzip();
    let fit = crate::rate_analysis::fit_decay(&pt, &pv, window);
    let profile = k.coeff().drift().default_profile(k.dim());
    let beta = profile.map_or(f64::NAN, |p| p.beta);
    let (passed, detail) = match &fit {
        _ if x0 == y0 => (tv.iter().all(|&v| v == 0.0), "x0 = y0: 2P(T>t) is zero".to_string()),
        Ok(f) => (f.rate > 0.0, format!("{label} (profile beta={beta}): rate {:.4}, r2 {:.4}", f.rate, f.r2)),
        Err(e) => (false, format!("{label}: {e}")),
    };
    let mut fits = Table::new(tname(prefix, &format!("tv_fit_{label}")), &["rate", "intercept", "r2", "points"]);
    if let Ok(f) = fit {
        fits.push(vec![num(f.rate), num(f.intercept), num(f.r2), f.n.to_string()]);
    }
    Ok(Section { tables: vec![t, fits], checks: vec![timer.check(id, &format!("TV decay ({label})"), passed, detail, None)] })
}

/// `sup_pairs 2‖f‖∞P(T>t)/|x−y|^θ` against `t` on a log grid of
/// `[0.01, 1]`, with ‖f‖∞ = 1 for the truncated test function
/// `f = (1 − |x|)⁺`.
pub(super) fn gradient_rate(
    prefix: &str,
    id: &str,
    k: &CouplingKernel,
    theta: f64,
    distances: &[f64],
    sim: &SimConfig,
    budget: Option<f64>,
) -> Result<Section> {
    let timer = Timer::start();
    let alpha = k.levy().alpha();
    let grid = log_space(0.01, 1.0, 13);
    let dim = k.dim();
    let anchor = Vector::splat(dim, 0.3);
    let mut sup = vec![0.0f64; grid.len()];
    let mut t = Table::new(tname(prefix, "gradient_rate"), &["distance", "t", "survival", "bound_over_r_theta"]);
    for &r in distances {
        let y = anchor + direction(dim, 0).scale(r);
        let c = coupling_time_ensemble(k, &anchor, &y, sim, &grid)?;
        for (j, &tt) in grid.iter().enumerate() {
            let s = c.survival[j + 1];
            let v = 2.0 * s / r.powf(theta);
            sup[j] = sup[j].max(v);
            t.push(vec![num(r), num(tt), num(s), num(v)]);
        }
    }
    let lx: Vec<f64> = grid.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = sup.iter().map(|v| v.max(1e-300).ln()).collect();
    let fit = linear_fit(&lx, &ly)?;
    let target = -theta / alpha;
    let passed = sup.iter().all(|&v| v > 0.0) && (fit.slope - target).abs() <= 0.3;

    // the analytic envelope shape with the sampled J curve
    let mut env = Table::new(tname(prefix, "gradient_envelope"), &["t", "sup_bound", "envelope_shape"]);
    let radii = [0.1, 0.05, 0.025, 0.0125].map(|r: f64| r.min(k.kappa()));
    let curves = estimate_j_k(k, &radii, 2, &QuadOptions::default().with_rel_tol(1e-7))?;
    let gc = gradient_rate_certificate(k.levy(), theta, alpha, &curves)?;
    for (j, &tt) in grid.iter().enumerate() {
        env.push(vec![num(tt), num(sup[j]), num(gc.envelope(tt, 1.0, 1.0))]);
    }
    let detail = format!(
        "alpha={alpha}, theta={theta}, distances {distances:?}: slope {:.4} in [{:.2}, {:.2}], r2 {:.3}",
        fit.slope,
        target - 0.3,
        target + 0.3,
        fit.r2
    );
    Ok(Section { tables: vec![t, env], checks: vec![timer.check(id, "gradient-rate shape", passed, detail, budget)] })
}

pub(super) fn invariant_probe(
    prefix: &str,
    id: &str,
    cf: &CoefficientField,
    levy: &LevyModel,
    starts: &[Vector],
    sim: &SimConfig,
    budget: Option<f64>,
) -> Result<Section> {
    let timer = Timer::start();
    let h = sim.horizon;
    let cauchy = [h / 16.0, h / 8.0, h / 4.0];
    let probe = invariant_measure_probe(cf, levy, starts, sim, &cauchy)?;
    let mut t = Table::new(tname(prefix, "invariant_energy"), &["start", "statistic", "null_mean", "null_sd", "q95", "p_value"]);
    for (i, e) in probe.tests.iter().enumerate() {
        t.push(vec![(i + 1).to_string(), num(e.statistic), num(e.null_mean), num(e.null_sd), num(e.q95), num(e.p_value)]);
    }
    let mut c = Table::new(tname(prefix, "invariant_cauchy"), &["t", "w1_t_2t"]);
    for (tt, w) in probe.cauchy_times.iter().zip(&probe.cauchy_w1) {
        c.push(vec![num(*tt), num(*w)]);
    }
    let mut tables = vec![t, c];
    let opts = QuadOptions::default().with_rel_tol(1e-7);
    if let Ok(ly) = lyapunov_check(cf, levy, &[0.0, 1.0, 2.0, 4.0, 8.0, 16.0], 1.0, &opts) {
        let mut l = Table::new(tname(prefix, "lyapunov"), &["radius", "f", "lf"]);
        for i in 0..ly.radii.len() {
            l.push(vec![num(ly.radii[i]), num(ly.f_values[i]), num(ly.lf_values[i])]);
        }
        l.push(vec!["c4".into(), num(ly.c4), String::new()]);
        l.push(vec!["c5".into(), num(ly.c5), String::new()]);
        tables.push(l);
    }
    let worst = probe.tests.iter().map(|e| e.statistic / e.q95).fold(0.0, f64::max);
    let detail = format!("{} starts, horizon {h}, n={}: max statistic/q95 {worst:.3} (<= 1)", starts.len(), sim.n_paths);
    Ok(Section { tables, checks: vec![timer.check(id, "invariant measure", probe.passed, detail, budget)] })
}

fn opts_for(cfg: &ExperimentConfig) -> QuadOptions {
    QuadOptions::default().with_rel_tol(cfg.params.rel_tol.unwrap_or(1e-6))
}

fn window(cfg: &ExperimentConfig) -> (f64, f64) {
    cfg.params.window.map_or((1.0, 10.0), |[a, b]| (a, b))
}

/// One scenario on the config's own model.
pub(super) fn single(cfg: &ExperimentConfig, s: Scenario) -> Result<Section> {
    let k = cfg.kernel()?;
    let opts = opts_for(cfg);
    let sim = cfg.sim.to_sim();
    let p = &cfg.params;
    let x0 = cfg.point(&p.x0, 1.0);
    let y0 = cfg.point(&p.y0, -1.0);
    match s {
        Scenario::Marginality => marginality("", "marginality", &k, p.n_pairs.unwrap_or(20), &opts),
        Scenario::Pushforward => pushforward("", "pushforward", &k, p.n_pairs.unwrap_or(10), &opts),
        Scenario::DriftBound => drift_bound("", "drift_bound", &k, p.n_pairs.unwrap_or(50), &opts),
        Scenario::JExponent => {
            let radii = p.radii.clone().unwrap_or_else(|| vec![0.1, 0.05, 0.025, 0.0125]);
            j_exponent("", "j_exponent", "model", &k, &radii, p.samples_per_radius.unwrap_or(4), &opts)
        }
        Scenario::CouplingDecay => coupling_decay("", "coupling_decay", &k, &x0, &y0, &sim, window(cfg), None),
        Scenario::TvDecay => tv_decay("", "tv_decay", "model", &k, &x0, &y0, &sim, window(cfg)),
        Scenario::GradientRate => {
            let d = p.distances.clone().unwrap_or_else(|| vec![0.2, 0.1, 0.05]);
            gradient_rate("", "gradient_rate", &k, p.theta.unwrap_or(0.25), &d, &sim, None)
        }
        Scenario::InvariantProbe => {
            let starts: Vec<Vector> = match &p.starts {
                Some(s) => s.iter().map(|v| Vector::from_slice(v)).collect(),
                None => vec![Vector::splat(k.dim(), 5.0), Vector::splat(k.dim(), -5.0)],
            };
            invariant_probe("", "invariant_probe", k.coeff(), k.levy(), &starts, &sim, None)
        }
        Scenario::MarginalLaw => marginal_law("", "marginal_law", "model", &k, &x0, &y0, &sim),
        Scenario::Coalescence => {
            // the far-field bookkeeping is exact only for additive noise in one dimension
            let lv = k.levy();
            let far = kernel(1, SupportVariant::Ball, lv.alpha(), Drift::Zero, Diffusion::Constant { scale: 1.0 }, k.kappa())?;
            coalescence("", "coalescence", &k, &far, sim.seed, None)
        }
        Scenario::FullSuite => unreachable!("handled by full_suite"),
    }
}

fn kernel(dim: usize, support: SupportVariant, alpha: f64, drift: Drift, diffusion: Diffusion, kappa: f64) -> Result<CouplingKernel> {
    let levy = LevyModel::new(dim, alpha, 1.0, 1.0, support)?;
    CouplingKernel::new(levy, CoefficientField::new(dim, drift, diffusion)?, kappa)
}

/// Additive preset: d = 1, Ball, α = 0.5, `b = −x + sin x`, σ = 1.
pub fn additive_preset() -> Result<CouplingKernel> {
    kernel(1, SupportVariant::Ball, 0.5, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, Diffusion::Constant { scale: 1.0 }, 1.0)
}

/// Multiplicative preset: d = 2, Ball, α = 1.2, `b = −x`,
/// `σ = diag(2 + ½ sin xᵢ)`.
pub fn multiplicative_preset() -> Result<CouplingKernel> {
    kernel(2, SupportVariant::Ball, 1.2, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 0.5 }, 1.0)
}

/// Every acceptance check with built-in presets; only the seed and output
/// directory come from the config.
pub(super) fn full_suite(cfg: &ExperimentConfig) -> Result<Section> {
    let seed = cfg.sim.seed;
    let opts = QuadOptions::default().with_rel_tol(1e-6);
    let add = additive_preset()?;
    let mult = multiplicative_preset()?;
    let mut out = Section::default();
    let group = |out: &mut Section, id: &str, name: &str, budget: f64, start: Instant, parts: Vec<Section>| {
        let mut merged = Section::default();
        for p in parts {
            merged.extend(p);
        }
        let passed = merged.checks.iter().all(|c| c.passed);
        let detail = merged.checks.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join(" | ");
        out.tables.extend(merged.tables);
        out.checks.push(Check {
            id: id.into(),
            name: name.into(),
            passed,
            detail,
            elapsed_secs: start.elapsed().as_secs_f64(),
            budget_secs: Some(budget),
        });
    };

    let s = Instant::now();
    let parts = vec![marginality("c01_additive", "C1", &add, 20, &opts)?, marginality("c01_multiplicative", "C1", &mult, 20, &opts)?];
    group(&mut out, "C1", "marginality", 120.0, s, parts);

    let s = Instant::now();
    let parts = vec![pushforward("c02_additive", "C2", &add, 10, &opts)?, pushforward("c02_multiplicative", "C2", &mult, 10, &opts)?];
    group(&mut out, "C2", "pushforward identity", 60.0, s, parts);

    let s = Instant::now();
    let parts = vec![drift_bound("c03_additive", "C3", &add, 50, &opts)?, drift_bound("c03_multiplicative", "C3", &mult, 50, &opts)?];
    group(&mut out, "C3", "drift bound", 300.0, s, parts);

    let s = Instant::now();
    let near = kernel(2, SupportVariant::Ball, 1.2, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 0.5 }, 0.5)?;
    let far = kernel(1, SupportVariant::Ball, 0.5, Drift::SinPerturbed { rate: 1.0, amp: 1.0 }, Diffusion::Constant { scale: 1.0 }, 0.5)?;
    let parts = vec![coalescence("c04", "C4", &near, &far, seed, None)?];
    group(&mut out, "C4", "coalescence mechanics", 60.0, s, parts);

    let s = Instant::now();
    let sim5 = SimConfig::new(1.0, 0.01, 1e-2, seed, 100_000);
    let a5 = kernel(2, SupportVariant::HalfSlab, 1.2, Drift::Linear { rate: 1.0 }, Diffusion::Constant { scale: 1.0 }, 1.0)?;
    let m5 = kernel(2, SupportVariant::HalfSlab, 1.2, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 0.5 }, 1.0)?;
    let (x5, y5) = (Vector::from_slice(&[0.5, 0.0]), Vector::from_slice(&[-0.3, 0.4]));
    let parts = vec![
        marginal_law("c05", "C5", "additive", &a5, &x5, &y5, &sim5)?,
        marginal_law("c05", "C5", "multiplicative", &m5, &x5, &y5, &sim5)?,
    ];
    group(&mut out, "C5", "marginal law", 600.0, s, parts);

    let s = Instant::now();
    let radii = [0.1, 0.05, 0.025, 0.0125];
    let mut parts = Vec::new();
    for alpha in [0.5, 1.5] {
        for support in [SupportVariant::Ball, SupportVariant::HalfSlab] {
            let k = kernel(2, support, alpha, Drift::Linear { rate: 1.0 }, Diffusion::DiagonalSin { base: 2.0, amp: 0.5 }, 1.0)?;
            let label = format!("{}_a{alpha}", support.name());
            parts.push(j_exponent("c06", "C6", &label, &k, &radii, 4, &opts)?);
        }
    }
    group(&mut out, "C6", "J exponent", 180.0, s, parts);

    let sim7 = SimConfig::new(10.0, 0.01, 1e-3, seed, 10_000);
    let (x7, y7) = (Vector::from_slice(&[-2.0]), Vector::from_slice(&[2.0]));
    let s = Instant::now();
    let parts = vec![coupling_decay("c07", "C7", &add, &x7, &y7, &sim7, (1.0, 10.0), None)?];
    group(&mut out, "C7", "W1 decay", 900.0, s, parts);

    let s = Instant::now();
    let sign = kernel(1, SupportVariant::Ball, 0.5, Drift::SignPerturbed { rate: 1.0, amp: 1.0 }, Diffusion::Constant { scale: 1.0 }, 1.0)?;
    let beta0 = Drift::SignPerturbed { rate: 1.0, amp: 1.0 }.default_profile(1).map(|p| p.beta);
    debug_assert_eq!(beta0, Some(0.0));
    let mut parts = vec![
        tv_decay("c08", "C8", "sin", &add, &x7, &y7, &sim7, (1.0, 10.0))?,
        tv_decay("c08", "C8", "sign_beta0", &sign, &x7, &y7, &sim7, (1.0, 10.0))?,
    ];
    // the β = 0 certificate cannot be assembled (g₂ diverges); record why
    let prof0 = DissipativityProfile { beta: 0.0, ..sign.coeff().drift().default_profile(1).expect("sign preset has a profile") };
    let cert0 = contraction_certificate(&sign, &prof0, ConcChoice::Auto, &CertOptions::default());
    parts.push(Section { tables: vec![certificate_table("c08_certificate_beta0".into(), &cert0)], checks: Vec::new() });
    group(&mut out, "C8", "TV decay", 900.0, s, parts);

    let s = Instant::now();
    let holder = kernel(
        1,
        SupportVariant::Ball,
        0.5,
        Drift::HolderPerturbed { rate: 1.0, amp: 1.0, beta: 0.5 },
        Diffusion::Constant { scale: 1.0 },
        1.0,
    )?;
    let sim9 = SimConfig::new(1.0, 0.001, 1e-3, seed, 20_000);
    let parts = vec![gradient_rate("c09", "C9", &holder, 0.25, &[0.2, 0.1, 0.05], &sim9, None)?];
    group(&mut out, "C9", "gradient-rate shape", 1200.0, s, parts);

    let s = Instant::now();
    let ou = kernel(1, SupportVariant::Ball, 0.5, Drift::Linear { rate: 1.0 }, Diffusion::Constant { scale: 1.0 }, 1.0)?;
    let sim10 = SimConfig::new(50.0, 0.01, 1e-2, seed, 10_000);
    let starts = [Vector::from_slice(&[5.0]), Vector::from_slice(&[-5.0])];
    let parts = vec![invariant_probe("c10", "C10", ou.coeff(), ou.levy(), &starts, &sim10, None)?];
    group(&mut out, "C10", "invariant measure", 600.0, s, parts);

    Ok(out)
}
