use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "correlation inputs differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::invalid("correlation needs at least 2 points"));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation inputs must be finite"));
    }
    Ok(())
}

/// Number of pairs within runs of equal values in a sorted sequence.
fn tied_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], same: F) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if same(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Stable merge sort of `v`, returning the number of inversions removed.
fn sort_counting_swaps(v: &mut [f64]) -> u64 {
    let mut buf = vec![0.0; v.len()];
    merge_sort(v, &mut buf)
}

fn merge_sort(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort(&mut v[..mid], &mut buf[..mid]) + merge_sort(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j) = (0, mid);
    for slot in buf.iter_mut().take(n) {
        if j < n && (i >= mid || v[j] < v[i]) {
            *slot = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            *slot = v[i];
            i += 1;
        }
    }
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's τ-b with tie correction:
/// `(C − D) / sqrt((P − T_a)(P − T_b))`, `P = n(n−1)/2`.
///
/// O(n log n) via sorting by `a` and counting inversions in `b`.
/// Returns [`Error::Undefined`] when either input is entirely tied.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as u64;
    let total = n * (n - 1) / 2;

    let mut pairs: Vec<(f64, f64)> = a.iter().copied().zip(b.iter().copied()).collect();
    pairs.sort_by(|x, y| {
        x.0.partial_cmp(&y.0)
            .unwrap_or(Ordering::Equal)
            .then(x.1.partial_cmp(&y.1).unwrap_or(Ordering::Equal))
    });

    let ties_a = tied_pairs(&pairs, |x, y| x.0 == y.0);
    let ties_joint = tied_pairs(&pairs, |x, y| x.0 == y.0 && x.1 == y.1);
    let mut bs: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let swaps = sort_counting_swaps(&mut bs);
    let ties_b = tied_pairs(&bs, |x, y| x == y);

    let denom_a = total - ties_a;
    let denom_b = total - ties_b;
    if denom_a == 0 || denom_b == 0 {
        return Err(Error::Undefined(
            "Kendall's tau: one input has no untied pairs".into(),
        ));
    }
    let numer = total as f64 - ties_a as f64 - ties_b as f64 + ties_joint as f64 - 2.0 * swaps as f64;
    let tau = numer / ((denom_a as f64) * (denom_b as f64)).sqrt();
    Ok(tau.clamp(-1.0, 1.0))
}

/// Pearson product-moment correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::Undefined("Pearson: zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}
