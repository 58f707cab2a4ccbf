//! Spectral split of a feature matrix into main and residual components.
//!
//! `F = U Σ Vᵀ` is cut at the smallest `k` whose leading singular values hold
//! at least `threshold` of the singular-value sum. The main component keeps
//! `Σ[..k]`, the residual keeps the rest:
//!
//! ```text
//! F_m = U Σ_m Vᵀ,   F_r = U Σ_r Vᵀ,   Σ_r = Σ − Σ_m
//! ```
//!
//! `k` is an index cut, so equal singular values may straddle the boundary.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feature_store::FeatureMatrix;

pub const DEFAULT_ENERGY: f64 = 0.8;

/// Thin SVD factors with `r = min(n, d)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `n x r`
    pub u: DMatrix<f64>,
    /// Descending, non-negative.
    pub sigma: Vec<f64>,
    /// `d x r`
    pub v: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank_bound(&self) -> usize {
        self.sigma.len()
    }

    /// `U[:, range] diag(σ[range]) V[:, range]ᵀ`
    pub fn reconstruct(&self, range: std::ops::Range<usize>) -> DMatrix<f64> {
        let (n, d) = (self.u.nrows(), self.v.nrows());
        if range.is_empty() {
            return DMatrix::zeros(n, d);
        }
        let width = range.len();
        let mut us = self.u.columns(range.start, width).into_owned();
        for (j, mut col) in us.column_iter_mut().enumerate() {
            col *= self.sigma[range.start + j];
        }
        us * self.v.columns(range.start, width).transpose()
    }
}

/// Thin SVD with singular values sorted descending and signs canonicalized so
/// the largest-magnitude entry of every right singular vector is positive.
pub fn thin_svd(f: &DMatrix<f64>) -> Result<SvdFactors> {
    let (n, d) = f.shape();
    if n == 0 || d == 0 {
        return Err(Error::invalid("cannot decompose an empty matrix"));
    }
    if let Some(pos) = f.iter().position(|v| !v.is_finite()) {
        // nalgebra storage is column-major
        return Err(Error::NonFinite {
            row: pos % n,
            col: pos / n,
        });
    }
    let a = faer::Mat::from_fn(n, d, |i, j| f[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("SVD did not converge: {e:?}")))?;
    let (u_raw, v_raw, values) = (svd.U(), svd.V(), svd.S().column_vector());
    let r = n.min(d);

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));

    let mut u = DMatrix::zeros(n, r);
    let mut v = DMatrix::zeros(d, r);
    let mut sigma = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        let mut vcol = nalgebra::DVector::from_fn(d, |i, _| v_raw[(i, src)]);
        let mut ucol = nalgebra::DVector::from_fn(n, |i, _| u_raw[(i, src)]);
        let pivot = vcol
            .iter()
            .enumerate()
            .fold((0usize, 0.0f64), |best, (i, x)| {
                if x.abs() > best.1 {
                    (i, x.abs())
                } else {
                    best
                }
            })
            .0;
        if vcol[pivot] < 0.0 {
            vcol.neg_mut();
            ucol.neg_mut();
        }
        v.set_column(dst, &vcol);
        u.set_column(dst, &ucol);
        sigma.push(values[src].max(0.0));
    }
    Ok(SvdFactors { u, sigma, v })
}

fn check_spectrum(sigma: &[f64]) -> Result<f64> {
    if sigma.is_empty() {
        return Err(Error::invalid("empty singular value list"));
    }
    if sigma.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(Error::invalid("singular values must be finite and non-negative"));
    }
    if sigma.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::invalid("singular values must be sorted descending"));
    }
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return Err(Error::Numerical(
            "all singular values are zero; spectral split is undefined".into(),
        ));
    }
    Ok(total)
}

/// Smallest `k` with `Σ_{i<k} σ_i / Σ σ_i >= threshold` (inclusive).
pub fn select_energy_rank(sigma: &[f64], threshold: f64) -> Result<usize> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "energy threshold must be in (0, 1], got {threshold}"
        )));
    }
    let total = check_spectrum(sigma)?;
    let mut cum = 0.0;
    for (i, s) in sigma.iter().enumerate() {
        cum += s;
        if cum / total >= threshold {
            return Ok(i + 1);
        }
    }
    // Rounding in the running sum can leave the last ratio a hair under 1.
    Ok(sigma.len())
}

/// Fraction of the singular-value sum held by the first `k` values.
pub fn energy_ratio(sigma: &[f64], k: usize) -> f64 {
    let total: f64 = sigma.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    sigma[..k.min(sigma.len())].iter().sum::<f64>() / total
}

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub factors: SvdFactors,
    pub k: usize,
    pub energy_ratio: f64,
    pub threshold: f64,
    pub main: DMatrix<f64>,
    pub residual: DMatrix<f64>,
}

impl SpectralSplit {
    /// First `k` right singular vectors, `d x k`.
    pub fn main_basis(&self) -> DMatrix<f64> {
        self.factors.v.columns(0, self.k).into_owned()
    }

    /// Projects held-out rows into this split's basis.
    pub fn project(&self, f_new: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        project_split(&self.factors.v, self.k, f_new)
    }
}

pub fn split_components(f: &DMatrix<f64>, threshold: f64) -> Result<SpectralSplit> {
    let factors = thin_svd(f)?;
    let k = select_energy_rank(&factors.sigma, threshold)?;
    let r = factors.rank_bound();
    let main = factors.reconstruct(0..k);
    let residual = factors.reconstruct(k..r);
    Ok(SpectralSplit {
        energy_ratio: energy_ratio(&factors.sigma, k),
        factors,
        k,
        threshold,
        main,
        residual,
    })
}

/// `main = f_new V_k V_kᵀ`, `residual = f_new − main`.
pub fn project_split(
    v: &DMatrix<f64>,
    k: usize,
    f_new: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if f_new.ncols() != v.nrows() {
        return Err(Error::invalid(format!(
            "projection: features have {} columns, basis expects {}",
            f_new.ncols(),
            v.nrows()
        )));
    }
    if k > v.ncols() {
        return Err(Error::invalid(format!(
            "projection: k = {k} exceeds the {} available singular vectors",
            v.ncols()
        )));
    }
    let vk = v.columns(0, k);
    let main = (f_new * vk) * vk.transpose();
    let residual = f_new - &main;
    Ok((main, residual))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumStats {
    pub energy_curve: Vec<f64>,
    pub effective_rank_80: usize,
    pub effective_rank_95: usize,
}

pub fn spectrum_stats(sigma: &[f64]) -> Result<SpectrumStats> {
    let total = check_spectrum(sigma)?;
    let mut cum = 0.0;
    let energy_curve = sigma
        .iter()
        .map(|s| {
            cum += s;
            (cum / total).min(1.0)
        })
        .collect();
    Ok(SpectrumStats {
        energy_curve,
        effective_rank_80: select_energy_rank(sigma, 0.8)?,
        effective_rank_95: select_energy_rank(sigma, 0.95)?,
    })
}

/// Which part of the features a probe is trained on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Full,
    Main,
    Residual,
}

impl std::str::FromStr for Component {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Component::Full),
            "main" => Ok(Component::Main),
            "residual" | "resid" => Ok(Component::Residual),
            other => Err(Error::invalid(format!("unknown component {other:?}"))),
        }
    }
}

/// Where the decomposition is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvdScope {
    /// One SVD of the whole training matrix; held-out rows are projected.
    Full,
    /// Every mini-batch is decomposed on its own.
    Batch,
}

impl std::str::FromStr for SvdScope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SvdScope::Full),
            "batch" => Ok(SvdScope::Batch),
            other => Err(Error::invalid(format!("unknown svd scope {other:?}"))),
        }
    }
}

/// Picks one component of a matrix decomposed on its own.
pub fn component_of(f: &DMatrix<f64>, component: Component, threshold: f64) -> Result<DMatrix<f64>> {
    match component {
        Component::Full => Ok(f.clone()),
        Component::Main => Ok(split_components(f, threshold)?.main),
        Component::Residual => Ok(split_components(f, threshold)?.residual),
    }
}

/// Per-chunk rank information from [`split_batches`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSplitInfo {
    pub rows: usize,
    pub k: usize,
    pub energy_ratio: f64,
}

/// Splits consecutive chunks of `batch_size` rows independently.
pub fn split_batches(
    f: &FeatureMatrix,
    threshold: f64,
    batch_size: usize,
) -> Result<(FeatureMatrix, FeatureMatrix, Vec<BatchSplitInfo>)> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let full = f.to_dmatrix();
    let mut main = DMatrix::zeros(f.n(), f.d());
    let mut residual = DMatrix::zeros(f.n(), f.d());
    let mut info = Vec::new();
    let mut start = 0;
    while start < f.n() {
        let rows = batch_size.min(f.n() - start);
        let chunk = full.rows(start, rows).into_owned();
        let split = split_components(&chunk, threshold)?;
        main.rows_mut(start, rows).copy_from(&split.main);
        residual.rows_mut(start, rows).copy_from(&split.residual);
        info.push(BatchSplitInfo {
            rows,
            k: split.k,
            energy_ratio: split.energy_ratio,
        });
        start += rows;
    }
    Ok((f.with_values(&main)?, f.with_values(&residual)?, info))
}
