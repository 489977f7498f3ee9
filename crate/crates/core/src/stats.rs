//! Small statistics toolkit for the Monte-Carlo checks: moments, two-sample
//! energy distance with a permutation null, 1-d W₁, least squares and
//! Wilson intervals.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Standardized differences of the mean and of the variance of two samples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentComparison {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub mean_z: f64,
    pub var_z: f64,
}

impl MomentComparison {
    pub fn within(&self, sigmas: f64) -> bool {
        self.mean_z.abs() <= sigmas && self.var_z.abs() <= sigmas
    }
}

pub fn compare_moments(a: &[f64], b: &[f64]) -> MomentComparison {
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let se_mean = (va / na + vb / nb).sqrt();
    // Var(s²) ≈ (m₄ − s⁴)/n
    let m4 = |xs: &[f64], m: f64| xs.iter().map(|x| (x - m).powi(4)).sum::<f64>() / xs.len() as f64;
    let se_var = ((m4(a, ma) - va * va) / na + (m4(b, mb) - vb * vb) / nb).max(0.0).sqrt();
    let z = |d: f64, se: f64| {
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    MomentComparison { mean_a: ma, mean_b: mb, var_a: va, var_b: vb, mean_z: z(ma - mb, se_mean), var_z: z(va - vb, se_var) }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PermutationTest {
    /// Observed energy distance (V-statistic).
    pub statistic: f64,
    pub null_mean: f64,
    pub null_sd: f64,
    /// `(statistic − null_mean)/null_sd`.
    pub z: f64,
    /// Fraction of permutations at least as extreme, with the +1 correction.
    pub p_value: f64,
    /// 95% quantile of the permutation null.
    pub q95: f64,
}

impl PermutationTest {
    pub fn within_95(&self) -> bool {
        self.statistic <= self.q95
    }
}

/// `2E|A−B| − E|A−A′| − E|B−B′|` from sums over a labeled pooled sample.
fn energy_from_sums(cross: f64, within_a: f64, within_b: f64, na: f64, nb: f64) -> f64 {
    2.0 * cross / (na * nb) - 2.0 * within_a / (na * na) - 2.0 * within_b / (nb * nb)
}

/// Energy distance of two scalar samples in O(N) after one sort of the
/// pooled values; `labels[k]` says whether sorted value `k` is in A.
fn energy_sorted(sorted: &[f64], labels: &[bool]) -> f64 {
    let (mut ca, mut cb, mut sa, mut sb) = (0.0, 0.0, 0.0, 0.0);
    let (mut wa, mut wb, mut cross) = (0.0, 0.0, 0.0);
    for (&v, &is_a) in sorted.iter().zip(labels) {
        if is_a {
            wa += v * ca - sa;
            cross += v * cb - sb;
            ca += 1.0;
            sa += v;
        } else {
            wb += v * cb - sb;
            cross += v * ca - sa;
            cb += 1.0;
            sb += v;
        }
    }
    energy_from_sums(cross, wa, wb, ca, cb)
}

/// Energy distance between two samples of points, with a permutation null
/// of `n_perm` relabelings. Scalar samples use the exact sorted form; for
/// d ≥ 2 the pooled distance matrix is built once, so callers should
/// subsample to a few thousand points.
pub fn energy_test(a: &[Vector], b: &[Vector], n_perm: usize, seed: u64) -> Result<PermutationTest> {
    if a.len() < 2 || b.len() < 2 || n_perm < 20 {
        return Err(Error::Precondition("energy test needs two samples of size >= 2 and >= 20 permutations".into()));
    }
    let dim = a[0].dim();
    let na = a.len();
    let pooled: Vec<&Vector> = a.iter().chain(b.iter()).collect();
    let n = pooled.len();
    let base: Vec<bool> = (0..n).map(|i| i < na).collect();

    let stat_fn: Box<dyn Fn(&[bool]) -> f64 + Sync> = if dim == 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| pooled[i][0].total_cmp(&pooled[j][0]));
        let sorted: Vec<f64> = order.iter().map(|&i| pooled[i][0]).collect();
        Box::new(move |lab: &[bool]| {
            let l: Vec<bool> = order.iter().map(|&i| lab[i]).collect();
            energy_sorted(&sorted, &l)
        })
    } else {
        let mut dist = vec![0.0f64; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (*pooled[i] - *pooled[j]).norm();
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Box::new(move |lab: &[bool]| {
            let (mut wa, mut wb, mut cross) = (0.0, 0.0, 0.0);
            for i in 0..n {
                let row = &dist[i * n..(i + 1) * n];
                for j in (i + 1)..n {
                    match (lab[i], lab[j]) {
                        (true, true) => wa += row[j],
                        (false, false) => wb += row[j],
                        _ => cross += row[j],
                    }
                }
            }
            let ca = lab.iter().filter(|&&l| l).count() as f64;
            energy_from_sums(cross, wa, wb, ca, n as f64 - ca)
        })
    };

    let statistic = stat_fn(&base);
    let null: Vec<f64> = (0..n_perm)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut lab = base.clone();
            lab.shuffle(&mut rng);
            stat_fn(&lab)
        })
        .collect();
    let (null_mean, null_var) = mean_var(&null);
    let null_sd = null_var.sqrt();
    let exceed = null.iter().filter(|&&s| s >= statistic).count();
    let mut sorted = null.clone();
    sorted.sort_by(f64::total_cmp);
    let q95 = sorted[((0.95 * n_perm as f64).ceil() as usize).min(n_perm) - 1];
    Ok(PermutationTest {
        statistic,
        null_mean,
        null_sd,
        z: if null_sd > 0.0 { (statistic - null_mean) / null_sd } else { 0.0 },
        p_value: (exceed + 1) as f64 / (n_perm + 1) as f64,
        q95,
    })
}

/// `W₁` between two empirical laws on ℝ, `∫|F_a − F_b|`.
pub fn wasserstein1_1d(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = f64::NAN;
    let mut out = 0.0;
    while i < a.len() || j < b.len() {
        let take_a = j >= b.len() || (i < a.len() && a[i] <= b[j]);
        let v = if take_a { a[i] } else { b[j] };
        if prev.is_finite() {
            out += (i as f64 / na - j as f64 / nb).abs() * (v - prev);
        }
        if take_a {
            i += 1;
        } else {
            j += 1;
        }
        prev = v;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub slope_se: f64,
    pub n: usize,
}

/// Ordinary least squares `y ≈ intercept + slope·x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Fit(format!("need at least 3 matched points, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if !(sxx > 0.0) || !sxy.is_finite() || !syy.is_finite() {
        return Err(Error::Fit("degenerate regression design".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let slope_se = (sse / (n - 2.0) / sxx).sqrt();
    Ok(LinearFit { slope, intercept, r2, slope_se, n: x.len() })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vec<Vector> {
        xs.iter().map(|&x| Vector::from_slice(&[x])).collect()
    }

    #[test]
    fn energy_matches_brute_force() {
        let a = [0.3, -1.2, 2.5, 0.0, 0.7];
        let b = [1.1, 1.9, -0.4, 3.3];
        let mean_abs = |xs: &[f64], ys: &[f64]| {
            let mut s = 0.0;
            for x in xs {
                for y in ys {
                    s += (x - y).abs();
                }
            }
            s / (xs.len() * ys.len()) as f64
        };
        let want = 2.0 * mean_abs(&a, &b) - mean_abs(&a, &a) - mean_abs(&b, &b);
        let t = energy_test(&v(&a), &v(&b), 50, 1).unwrap();
        assert!((t.statistic - want).abs() < 1e-12);
        // the matrix path agrees with the sorted path
        let lift = |xs: &[f64]| xs.iter().map(|&x| Vector::from_slice(&[x, 0.0])).collect::<Vec<_>>();
        let t2 = energy_test(&lift(&a), &lift(&b), 50, 1).unwrap();
        assert!((t2.statistic - want).abs() < 1e-12);
    }

    #[test]
    fn energy_detects_shift_and_not_noise() {
        let a: Vec<f64> = (0..400).map(|i| (i as f64 + 0.5) / 400.0 * 6.0 - 3.0).collect();
        let same: Vec<f64> = (0..400).map(|i| (i as f64 + 0.25) / 400.0 * 6.0 - 3.0).collect();
        let shifted: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        assert!(energy_test(&v(&a), &v(&same), 200, 3).unwrap().within_95());
        let t = energy_test(&v(&a), &v(&shifted), 200, 3).unwrap();
        assert!(!t.within_95() && t.z > 4.0);
    }

    #[test]
    fn w1_examples() {
        assert!((wasserstein1_1d(&[0.0, 1.0], &[0.5, 1.5]) - 0.5).abs() < 1e-15);
        assert!((wasserstein1_1d(&[0.0], &[0.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(wasserstein1_1d(&[1.0, 2.0], &[2.0, 1.0]), 0.0);
    }

    #[test]
    fn regression_and_wilson() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14 && (f.r2 - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        // closed form for p̂=½: ½ ± z√(¼n + z²/4)/(n+z²)
        let half = 1.96 * (25.0f64 + 1.96 * 1.96 / 4.0).sqrt() / (100.0 + 1.96 * 1.96);
        assert!((lo - (0.5 - half)).abs() < 1e-12 && (hi - (0.5 + half)).abs() < 1e-12);
        assert_eq!(wilson_interval(0, 10, 2.0).0, 0.0);
    }

    #[test]
    fn moments_z_scores() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let c = compare_moments(&a, &a);
        assert_eq!((c.mean_z, c.var_z), (0.0, 0.0));
        let (m, v) = mean_var(&a);
        assert_eq!((m, v), (2.5, 5.0 / 3.0));
    }
}
