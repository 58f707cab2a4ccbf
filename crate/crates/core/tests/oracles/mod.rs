//! Independent reference computations for tests. Nothing here calls into the
//! library's algorithm paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Smallest `k` whose prefix ratio, recomputed from scratch, meets `threshold`.
pub fn minimal_k_scan(sigma: &[f64], threshold: f64) -> usize {
    let total: f64 = sigma.iter().sum();
    (1..=sigma.len())
        .find(|&k| sigma[..k].iter().sum::<f64>() / total >= threshold)
        .unwrap_or(sigma.len())
}

/// τ-b by enumerating every pair.
pub fn kendall_brute(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len();
    let (mut conc, mut disc, mut tie_a, mut tie_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i] - a[j];
            let db = b[i] - b[j];
            if da == 0.0 {
                tie_a += 1;
            }
            if db == 0.0 {
                tie_b += 1;
            }
            if da == 0.0 || db == 0.0 {
                continue;
            }
            if (da > 0.0) == (db > 0.0) {
                conc += 1;
            } else {
                disc += 1;
            }
        }
    }
    let pairs = (n * (n - 1) / 2) as i64;
    let denom = (((pairs - tie_a) * (pairs - tie_b)) as f64).sqrt();
    if denom == 0.0 {
        None
    } else {
        Some((conc - disc) as f64 / denom)
    }
}

/// Log evidence per sample of `y ~ N(F w, 1/β)`, `w ~ N(0, I/α)`, computed
/// directly from `A = αI + βFᵀF` with a Cholesky factorization.
pub fn direct_evidence(f: &DMatrix<f64>, y: &DVector<f64>, alpha: f64, beta: f64) -> f64 {
    let (n, d) = f.shape();
    let a = DMatrix::<f64>::identity(d, d) * alpha + f.transpose() * f * beta;
    let chol = a.cholesky().expect("A is positive definite");
    let m = chol.solve(&(f.transpose() * y)) * beta;
    let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let resid = (y - f * &m).norm_squared();
    let (n, d) = (n as f64, d as f64);
    (n * beta.ln() + d * alpha.ln()
        - logdet
        - beta * resid
        - alpha * m.norm_squared()
        - n * (2.0 * std::f64::consts::PI).ln())
        / (2.0 * n)
}

/// Best evidence on a `points x points` log-spaced grid over `[lo, hi]²`.
pub fn grid_max_evidence(f: &DMatrix<f64>, y: &DVector<f64>, points: usize, lo: f64, hi: f64) -> (f64, f64, f64) {
    let (llo, lhi) = (lo.ln(), hi.ln());
    let at = |i: usize| (llo + (lhi - llo) * i as f64 / (points - 1) as f64).exp();
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for i in 0..points {
        let alpha = at(i);
        for j in 0..points {
            let beta = at(j);
            let e = direct_evidence(f, y, alpha, beta);
            if e > best.0 {
                best = (e, alpha, beta);
            }
        }
    }
    best
}

pub fn one_hot(labels: &[u32], class: u32) -> DVector<f64> {
    DVector::from_iterator(labels.len(), labels.iter().map(|&l| if l == class { 1.0 } else { 0.0 }))
}

/// Best evidence on a fine log grid centered on `(alpha, beta)`, spanning
/// `half_width` in log space along each axis.
pub fn local_max_evidence(
    f: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    beta: f64,
    half_width: f64,
    points: usize,
) -> f64 {
    let offset = |i: usize| -half_width + 2.0 * half_width * i as f64 / (points - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..points {
        for j in 0..points {
            let e = direct_evidence(f, y, alpha * offset(i).exp(), beta * offset(j).exp());
            best = best.max(e);
        }
    }
    best
}

/// Log-space spacing of the `points`-node grid over `[lo, hi]`.
pub fn grid_step(points: usize, lo: f64, hi: f64) -> f64 {
    (hi.ln() - lo.ln()) / (points - 1) as f64
}
