//! Order-statistic interpolation quantiles (the common linear rule on
//! sorted data, `h = (n-1) p`).

use crate::error::{CoreError, Result};

/// Quantile of an already-sorted slice at probability `p` in (0, 1).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(CoreError::Domain("quantile of empty sample".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(CoreError::Domain(format!("quantile probability must be in (0,1), got {p}")));
    }
    let n = sorted.len();
    if n == 1 {
        return Ok(sorted[0]);
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        return Ok(sorted[n - 1]);
    }
    Ok(sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]))
}

/// Quantiles of an unsorted sample at each probability.
pub fn quantiles(samples: &[f64], probs: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(CoreError::Domain("quantiles of empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample in quantiles"));
    probs.iter().map(|&p| quantile_sorted(&sorted, p)).collect()
}

/// The 19 equally spaced probabilities 5%, 10%, ..., 95%.
pub fn nineteen_probs() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}
