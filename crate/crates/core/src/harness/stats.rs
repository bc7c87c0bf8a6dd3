use crate::error::{Error, Result};

/// Percentile by linear interpolation between closest ranks, inclusive:
/// the sorted samples sit at positions `i / (n - 1)`, so `p = 0` is the
/// minimum, `p = 100` the maximum and rank `p/100 · (n - 1)` is interpolated.
pub fn percentile(samples: &[f64], p: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(Error::InvalidConfig(format!("percentile {p} outside [0, 100]")));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = p / 100.0 * (v.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    Ok(v[lo] + (rank - lo as f64) * (v[hi] - v[lo]))
}

/// Empirical CDF: sorted samples with probability `(i + 1) / n`.
pub fn cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i + 1) as f64 / n))
        .collect()
}
