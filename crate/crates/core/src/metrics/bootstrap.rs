//! Seeded percentile bootstrap.
//!
//! Each replicate draws `n` units with replacement and recomputes a statistic.
//! The reported triple is the median and the two-sided percentile bounds of
//! the replicate distribution, so `lo <= median <= hi` always holds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sizes::quantile_sorted;
use crate::error::{Error, Result};

pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

pub(crate) fn check_params(resamples: usize, level: f64) -> Result<()> {
    if resamples == 0 {
        return Err(Error::InvalidInput("bootstrap needs at least one resample".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!("confidence level {level} outside (0, 1)")));
    }
    Ok(())
}

/// Deterministic index sets for `resamples` draws of `n` units.
pub(crate) fn resample_sets(n: usize, resamples: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..resamples)
        .map(|_| (0..n).map(|_| rng.random_range(0..n)).collect())
        .collect()
}

/// Summarizes replicate values; `None` if every replicate was undefined.
pub(crate) fn summarize(mut replicates: Vec<f64>, level: f64) -> Option<ConfidenceInterval> {
    replicates.retain(|v| v.is_finite());
    if replicates.is_empty() {
        return None;
    }
    replicates.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Some(ConfidenceInterval {
        median: quantile_sorted(&replicates, 0.5),
        lo: quantile_sorted(&replicates, tail),
        hi: quantile_sorted(&replicates, 1.0 - tail),
    })
}

/// Percentile bootstrap of the median of `values`.
pub fn bootstrap_ci(values: &[f64], resamples: usize, level: f64, seed: u64) -> Result<ConfidenceInterval> {
    if values.is_empty() {
        return Err(Error::EmptyInput("bootstrap needs at least one value"));
    }
    check_params(resamples, level)?;
    let mut buf = Vec::with_capacity(values.len());
    let replicates = resample_sets(values.len(), resamples, seed)
        .into_iter()
        .map(|idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| values[i]));
            buf.sort_by(f64::total_cmp);
            quantile_sorted(&buf, 0.5)
        })
        .collect();
    Ok(summarize(replicates, level).expect("finite values"))
}
