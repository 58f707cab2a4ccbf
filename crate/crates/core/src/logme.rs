//! LogME: log of the maximum marginal evidence of a Bayesian linear model
//! fitted from frozen features to one-hot targets.
//!
//! For a target `y` and features `F = U diag(σ) Vᵀ`, the model
//! `y ~ N(F w, β⁻¹)`, `w ~ N(0, α⁻¹ I)` has log evidence
//!
//! ```text
//! 2n·L = n ln β + d ln α − Σ_{i≤d} ln(α + βσᵢ²) − β‖y − F m‖² − α‖m‖² − n ln 2π
//! ```
//!
//! with `σᵢ = 0` for `i > rank`. `α` and `β` are found by the MacKay
//! fixed-point updates `α ← γ/‖m‖²`, `β ← (n − γ)/‖y − F m‖²`.
//! The score is the mean of `L` over classes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::FeatureMatrix;
use crate::spectral::thin_svd;

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_TOL: f64 = 1e-6;

/// Bounds on α and β. An unbounded α is the limit reached when the targets
/// carry no component inside the feature span.
pub const PRECISION_MIN: f64 = 1e-10;
pub const PRECISION_MAX: f64 = 1e10;

/// Floor applied to `‖y − F m‖²`.
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// One target regressed on a feature matrix, expressed in its SVD basis.
#[derive(Debug, Clone)]
pub struct EvidenceProblem {
    /// Singular values of the features (length `r = min(n, d)`).
    pub sigma: Vec<f64>,
    /// `Uᵀ y`
    pub z: Vec<f64>,
    /// Part of `‖y‖²` outside the span of `U`.
    pub y_perp_sq: f64,
    pub n: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Moments {
    gamma: f64,
    m_sq: f64,
    residual_sq: f64,
    residual_clamped: bool,
}

impl EvidenceProblem {
    fn moments(&self, alpha: f64, beta: f64) -> Moments {
        let mut gamma = 0.0;
        let mut m_sq = 0.0;
        let mut fit_sq = 0.0;
        for (&s, &z) in self.sigma.iter().zip(&self.z) {
            let s2 = s * s;
            let denom = alpha + beta * s2;
            gamma += beta * s2 / denom;
            let m = beta * s * z / denom;
            m_sq += m * m;
            // component of y − F m along this singular direction
            let r = z * alpha / denom;
            fit_sq += r * r;
        }
        let raw = fit_sq + self.y_perp_sq;
        Moments {
            gamma,
            m_sq,
            residual_sq: raw.max(RESIDUAL_FLOOR),
            residual_clamped: raw < RESIDUAL_FLOOR,
        }
    }

    /// Log evidence per sample at `(α, β)`.
    pub fn evidence(&self, alpha: f64, beta: f64) -> f64 {
        let mo = self.moments(alpha, beta);
        let n = self.n as f64;
        let d = self.d as f64;
        let logdet: f64 = self
            .sigma
            .iter()
            .take(self.d)
            .map(|s| (alpha + beta * s * s).ln())
            .sum::<f64>()
            + (self.d.saturating_sub(self.sigma.len())) as f64 * alpha.ln();
        (n * beta.ln() + d * alpha.ln()
            - logdet
            - beta * mo.residual_sq
            - alpha * mo.m_sq
            - n * (2.0 * std::f64::consts::PI).ln())
            / (2.0 * n)
    }

    /// One fixed-point update from `(α, β)`; returns the new pair and
    /// whether the residual floor was hit.
    pub fn update(&self, alpha: f64, beta: f64) -> (f64, f64, bool) {
        let mo = self.moments(alpha, beta);
        let n = self.n as f64;
        let new_alpha = if mo.m_sq > 0.0 {
            mo.gamma / mo.m_sq
        } else {
            PRECISION_MAX
        };
        let new_beta = (n - mo.gamma).max(0.0) / mo.residual_sq;
        (
            new_alpha.clamp(PRECISION_MIN, PRECISION_MAX),
            new_beta.clamp(PRECISION_MIN, PRECISION_MAX),
            mo.residual_clamped,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub alpha: f64,
    pub beta: f64,
    pub evidence: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_clamped: bool,
}

/// Iterates from `α = β = 1` until `|Δ ln α| + |Δ ln β| < tol`.
pub fn evidence_fixed_point(
    problem: &EvidenceProblem,
    max_iter: usize,
    tol: f64,
) -> Result<FixedPoint> {
    if max_iter == 0 {
        return Err(Error::invalid("max_iter must be at least 1"));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol must be positive"));
    }
    if problem.sigma.len() != problem.z.len() {
        return Err(Error::invalid("sigma and z lengths differ"));
    }
    if problem.n == 0 || problem.d == 0 {
        return Err(Error::invalid("evidence needs n, d >= 1"));
    }
    let (mut alpha, mut beta) = (1.0f64, 1.0f64);
    let mut clamped = false;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        let (a, b, c) = problem.update(alpha, beta);
        iterations += 1;
        clamped |= c;
        let delta = (a.ln() - alpha.ln()).abs() + (b.ln() - beta.ln()).abs();
        alpha = a;
        beta = b;
        if delta < tol {
            converged = true;
            break;
        }
    }
    let evidence = problem.evidence(alpha, beta);
    if !evidence.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite evidence at alpha={alpha}, beta={beta}"
        )));
    }
    Ok(FixedPoint {
        alpha,
        beta,
        evidence,
        iterations,
        converged,
        residual_clamped: clamped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEvidence {
    pub class: u32,
    pub alpha: f64,
    pub beta: f64,
    pub evidence: f64,
    pub iterations: usize,
    pub converged: bool,
    pub residual_clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogMEResult {
    pub per_class: Vec<ClassEvidence>,
    pub score: f64,
    /// True if every class converged.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct LogMEOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogMEOptions {
    fn default() -> Self {
        Self {
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }
}

pub fn logme_score(f: &FeatureMatrix) -> Result<LogMEResult> {
    logme_score_with(f, LogMEOptions::default())
}

/// One evidence problem per class that has at least one row; classes with
/// no rows are skipped.
pub fn logme_score_with(f: &FeatureMatrix, opts: LogMEOptions) -> Result<LogMEResult> {
    if f.n() < 2 {
        return Err(Error::invalid("LogME needs at least 2 samples"));
    }
    if f.classes_present() < 2 {
        return Err(Error::invalid("LogME needs at least 2 classes present"));
    }
    let x = f.to_dmatrix();
    if x.iter().all(|v| *v == 0.0) {
        return Err(Error::Numerical("all-zero features".into()));
    }
    let svd = thin_svd(&x)?;
    let counts = f.class_counts();

    let mut per_class = Vec::new();
    for class in 0..f.num_classes() {
        if counts[class as usize] == 0 {
            continue;
        }
        let y = DVector::from_iterator(
            f.n(),
            f.labels().iter().map(|&l| if l == class { 1.0 } else { 0.0 }),
        );
        let problem = rotate_target(&svd.u, &svd.sigma, &y, f.d());
        let fp = evidence_fixed_point(&problem, opts.max_iter, opts.tol)?;
        per_class.push(ClassEvidence {
            class,
            alpha: fp.alpha,
            beta: fp.beta,
            evidence: fp.evidence,
            iterations: fp.iterations,
            converged: fp.converged,
            residual_clamped: fp.residual_clamped,
        });
    }
    let score = per_class.iter().map(|c| c.evidence).sum::<f64>() / per_class.len() as f64;
    Ok(LogMEResult {
        converged: per_class.iter().all(|c| c.converged),
        per_class,
        score,
    })
}

fn rotate_target(u: &DMatrix<f64>, sigma: &[f64], y: &DVector<f64>, d: usize) -> EvidenceProblem {
    let z = u.transpose() * y;
    let perp = y - u * &z;
    EvidenceProblem {
        sigma: sigma.to_vec(),
        z: z.iter().copied().collect(),
        y_perp_sq: perp.norm_squared(),
        n: y.len(),
        d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_hand_trace() {
        // σ=1, z=1, y ∈ span(U), n=d=1, from α=β=1:
        // γ = 1/2, m = 1/2, y − Fm = 1/2  ⇒  α' = 0.5/0.25 = 2, β' = 0.5/0.25 = 2
        let p = EvidenceProblem {
            sigma: vec![1.0],
            z: vec![1.0],
            y_perp_sq: 0.0,
            n: 1,
            d: 1,
        };
        let (a, b, clamped) = p.update(1.0, 1.0);
        assert!((a - 2.0).abs() < 1e-15);
        assert!((b - 2.0).abs() < 1e-15);
        assert!(!clamped);
        // evidence at α=β=1: [0 + 0 − ln 2 − 1/4 − 1/4 − ln 2π] / 2
        let expected = (-(2.0f64).ln() - 0.5 - (2.0 * std::f64::consts::PI).ln()) / 2.0;
        assert!((p.evidence(1.0, 1.0) - expected).abs() < 1e-15);
    }

    #[test]
    fn orthogonal_targets_terminate() {
        let p = EvidenceProblem {
            sigma: vec![2.0, 1.0],
            z: vec![0.0, 0.0],
            y_perp_sq: 3.0,
            n: 5,
            d: 2,
        };
        let fp = evidence_fixed_point(&p, 100, 1e-6).unwrap();
        assert!(fp.converged);
        assert_eq!(fp.alpha, PRECISION_MAX);
        assert!(fp.evidence.is_finite());
    }

    #[test]
    fn zero_target_hits_residual_floor() {
        let p = EvidenceProblem {
            sigma: vec![1.0],
            z: vec![0.0],
            y_perp_sq: 0.0,
            n: 3,
            d: 1,
        };
        let fp = evidence_fixed_point(&p, 100, 1e-6).unwrap();
        assert!(fp.residual_clamped);
        assert!(fp.evidence.is_finite());
    }

    #[test]
    fn converged_point_is_fixed() {
        let p = EvidenceProblem {
            sigma: vec![3.0, 1.5, 0.2],
            z: vec![1.2, -0.4, 0.3],
            y_perp_sq: 0.8,
            n: 10,
            d: 3,
        };
        let tol = 1e-6;
        let fp = evidence_fixed_point(&p, 1000, tol).unwrap();
        assert!(fp.converged);
        let (a, b, _) = p.update(fp.alpha, fp.beta);
        assert!((a.ln() - fp.alpha.ln()).abs() + (b.ln() - fp.beta.ln()).abs() < tol);
    }

    #[test]
    fn input_errors() {
        let f = FeatureMatrix::new(1, 2, 2, vec![1.0, 2.0], vec![0]).unwrap();
        assert!(logme_score(&f).is_err());
        let f = FeatureMatrix::new(3, 2, 2, vec![1.0; 6], vec![0, 0, 0]).unwrap();
        assert!(logme_score(&f).is_err());
        let f = FeatureMatrix::new(2, 2, 2, vec![0.0; 4], vec![0, 1]).unwrap();
        assert!(matches!(logme_score(&f), Err(Error::Numerical(_))));
    }
}
