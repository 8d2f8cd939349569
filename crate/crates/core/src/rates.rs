//! Empirical convergence rates.

use alloc::vec::Vec;

/// Least-squares slope of `log y` against `log x`. Points with
/// non-positive or non-finite values are skipped; `None` if fewer than two
/// remain or all `x` coincide.
pub fn ls_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (libm::log(*a), libm::log(*b)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Slope over the last `k` points.
pub fn tail_slope(x: &[f64], y: &[f64], k: usize) -> Option<f64> {
    let n = x.len().min(y.len());
    let s = n.saturating_sub(k);
    ls_slope(&x[s..n], &y[s..n])
}

/// Rates between consecutive points; the first entry is `None`.
pub fn pairwise(x: &[f64], y: &[f64]) -> Vec<Option<f64>> {
    (0..x.len().min(y.len())).map(|i| if i == 0 { None } else { ls_slope(&x[i - 1..=i], &y[i - 1..=i]) }).collect()
}
