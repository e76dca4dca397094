//! Order statistics used by thresholding and reporting.

use alloc::vec::Vec;

use crate::error::{invalid, Result};

/// Nearest-rank percentile: the `ceil(p / 100 * N)`-th smallest value.
pub fn nearest_rank(values: &[f64], percentile: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(invalid("percentile of an empty sequence"));
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(invalid("percentile must lie strictly between 0 and 100"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(invalid("percentile input contains NaN"));
    }
    let n = values.len();
    let rank = (libm::ceil(percentile / 100.0 * n as f64) as usize).clamp(1, n);
    let mut scratch: Vec<f64> = values.to_vec();
    let (_, nth, _) = scratch.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*nth)
}

/// Linearly interpolated quantile (`q` in `[0, 1]`) of already sorted data.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

fn sorted_copy(values: &[f64]) -> Option<Vec<f64>> {
    if values.is_empty() || values.iter().any(|v| v.is_nan()) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(v)
}

pub fn median(values: &[f64]) -> Option<f64> {
    sorted_copy(values).map(|v| sorted_quantile(&v, 0.5))
}

/// Interquartile range with linear interpolation between order statistics.
pub fn iqr(values: &[f64]) -> Option<f64> {
    sorted_copy(values).map(|v| sorted_quantile(&v, 0.75) - sorted_quantile(&v, 0.25))
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}
