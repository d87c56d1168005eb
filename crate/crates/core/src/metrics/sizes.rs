use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::GroundTruthInstance;

/// Linear-interpolation quantile of an ascending slice (`p` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SizeBucket {
    S,
    M,
    L,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 3] = [SizeBucket::S, SizeBucket::M, SizeBucket::L];
}

/// Tercile area thresholds (pixels²) of a ground-truth set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeBuckets {
    pub t_low: f64,
    pub t_high: f64,
}

impl SizeBuckets {
    pub fn bucket(&self, area: f64) -> SizeBucket {
        if area <= self.t_low {
            SizeBucket::S
        } else if area > self.t_high {
            SizeBucket::L
        } else {
            SizeBucket::M
        }
    }
}

pub fn stratify_by_size(gts: &[GroundTruthInstance]) -> Result<SizeBuckets> {
    if gts.is_empty() {
        return Err(Error::EmptyInput("size stratification needs ground truth"));
    }
    let mut areas: Vec<f64> = gts.iter().map(|g| g.bbox.area()).collect();
    areas.sort_by(f64::total_cmp);
    Ok(SizeBuckets {
        t_low: quantile_sorted(&areas, 1.0 / 3.0),
        t_high: quantile_sorted(&areas, 2.0 / 3.0),
    })
}
