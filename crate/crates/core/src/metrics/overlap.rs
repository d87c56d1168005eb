use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, BitMask};

/// Intersection over union of two boxes; 0 when the union is empty.
pub fn iou_bbox(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskOverlap {
    pub iou: f64,
    pub dice: f64,
}

/// Jaccard index and Dice coefficient of two equally sized masks.
///
/// Two empty masks agree perfectly on absence and score `(1, 1)`.
pub fn mask_overlap(a: &BitMask, b: &BitMask) -> Result<MaskOverlap> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(Error::DimensionMismatch(format!(
            "masks {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (mut inter, mut na, mut nb) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        na += x as u64;
        nb += y as u64;
        inter += (x && y) as u64;
    }
    if na + nb == 0 {
        return Ok(MaskOverlap { iou: 1.0, dice: 1.0 });
    }
    let union = na + nb - inter;
    Ok(MaskOverlap {
        iou: inter as f64 / union as f64,
        dice: 2.0 * inter as f64 / (na + nb) as f64,
    })
}
