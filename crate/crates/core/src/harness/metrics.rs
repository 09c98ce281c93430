//! Empirical CDFs and interpolated percentiles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub rate_bps: f64,
    pub fraction: f64,
}

/// Sorted values paired with cumulative fractions `i / len`, `i = 1..=len`.
pub fn compute_ecdf(values: &[f64]) -> Result<Vec<EcdfPoint>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("ecdf values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let len = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, rate_bps)| EcdfPoint {
            rate_bps,
            fraction: (i + 1) as f64 / len,
        })
        .collect())
}

/// Percentile `q` in `[0, 1]` by linear interpolation between order
/// statistics: position `(len - 1)·q` in the sorted values.
pub fn percentile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("percentile values"));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(format!("percentile rank {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, q))
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * q;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("mean values"));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}
