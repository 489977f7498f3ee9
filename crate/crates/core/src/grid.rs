//! Deterministic point sets for structural checks and pair sweeps.

use crate::linalg::Vector;

/// Sobol low-discrepancy sequence in up to three dimensions (Gray-code
/// construction, origin skipped).
pub struct Sobol {
    dim: usize,
    directions: [[u32; 32]; 3],
    state: [u32; 3],
    index: u32,
}

impl Sobol {
    pub fn new(dim: usize) -> Self {
        assert!((1..=3).contains(&dim));
        let mut directions = [[0u32; 32]; 3];
        for (k, v) in directions[0].iter_mut().enumerate() {
            *v = 1u32 << (31 - k);
        }
        // (degree, coefficient bits, initial m) for x+1 and x²+x+1
        let polys: [(usize, u32, [u32; 2]); 2] = [(1, 0, [1, 0]), (2, 1, [1, 3])];
        for (j, &(s, a, m0)) in polys.iter().enumerate() {
            let mut m = [0u32; 32];
            m[..s].copy_from_slice(&m0[..s]);
            for i in s..32 {
                let mut val = m[i - s] ^ (m[i - s] << s);
                for k in 1..s {
                    if (a >> (s - 1 - k)) & 1 == 1 {
                        val ^= m[i - k] << k;
                    }
                }
                m[i] = val;
            }
            for i in 0..32 {
                directions[j + 1][i] = m[i] << (31 - i);
            }
        }
        Sobol { dim, directions, state: [0; 3], index: 0 }
    }

    /// Next point in the unit cube.
    pub fn next_point(&mut self) -> Vector {
        let c = self.index.trailing_ones() as usize;
        self.index += 1;
        let mut out = Vector::zeros(self.dim);
        for j in 0..self.dim {
            self.state[j] ^= self.directions[j][c];
            out[j] = self.state[j] as f64 / 4_294_967_296.0;
        }
        out
    }
}

/// `n` Sobol points scaled to the cube `[lo, hi]^d`.
pub fn sobol_cube(dim: usize, n: usize, lo: f64, hi: f64) -> Vec<Vector> {
    let mut s = Sobol::new(dim);
    (0..n)
        .map(|_| {
            let mut p = s.next_point();
            for j in 0..dim {
                p[j] = lo + (hi - lo) * p[j];
            }
            p
        })
        .collect()
}

/// Deterministic unit direction number `i` (golden-angle spiral).
pub fn direction(dim: usize, i: usize) -> Vector {
    let golden = 2.399_963_229_728_653;
    match dim {
        1 => Vector::from_slice(&[if i % 2 == 0 { 1.0 } else { -1.0 }]),
        2 => {
            let (s, c) = (golden * i as f64).sin_cos();
            Vector::from_slice(&[c, s])
        }
        _ => {
            let u = 1.0 - 2.0 * ((i as f64 + 0.5) * 0.618_033_988_749_894_9).fract();
            let rho = (1.0 - u * u).sqrt();
            let (s, c) = (golden * i as f64).sin_cos();
            Vector::from_slice(&[u, rho * c, rho * s])
        }
    }
}

/// `n` pairs whose distances are log-spaced in `[d_lo, d_hi]`, anchored at
/// Sobol points of `[lo, hi]^d`.
pub fn log_spaced_pairs(dim: usize, n: usize, d_lo: f64, d_hi: f64, lo: f64, hi: f64) -> Vec<(Vector, Vector)> {
    let anchors = sobol_cube(dim, n, lo, hi);
    anchors
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let dist = d_lo * (d_hi / d_lo).powf(t);
            let y = x + direction(dim, i).scale(dist);
            (x, y)
        })
        .collect()
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
}

pub fn lin_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
