//! Head tensors built from known boxes, for tests, benchmarks and replay
//! fixtures that need no trained network.

use super::preprocess::ScaleInfo;
use crate::error::{Error, Result};
use crate::geometry::Detection;
use crate::tensor::RawTensor;

/// Encodes `dets` (source-image coordinates) into the first columns of a
/// `(1, 4 + num_classes, num_anchors)` head. Remaining columns are zero.
pub fn synthetic_head(dets: &[Detection], num_classes: usize, num_anchors: usize, scales: &ScaleInfo) -> Result<RawTensor> {
    synthetic_seg_head(dets, &[], num_classes, 0, num_anchors, scales)
}

/// Like [`synthetic_head`] with `num_coeffs` mask-coefficient rows;
/// `coeffs[k]` belongs to `dets[k]` (missing entries are zero).
pub fn synthetic_seg_head(
    dets: &[Detection],
    coeffs: &[Vec<f32>],
    num_classes: usize,
    num_coeffs: usize,
    num_anchors: usize,
    scales: &ScaleInfo,
) -> Result<RawTensor> {
    if dets.len() > num_anchors {
        return Err(Error::InvalidInput(format!("{} boxes do not fit {num_anchors} anchors", dets.len())));
    }
    if num_classes == 0 {
        return Err(Error::InvalidInput("num_classes must be >= 1".into()));
    }
    let rows = 4 + num_classes + num_coeffs;
    let n = num_anchors;
    let mut d = vec![0f32; rows * n];
    for (a, det) in dets.iter().enumerate() {
        let c = det.class_id as usize;
        if c >= num_classes {
            return Err(Error::InvalidInput(format!("class {c} >= {num_classes}")));
        }
        let (x1, y1) = scales.to_model(det.bbox.x1, det.bbox.y1);
        let (x2, y2) = scales.to_model(det.bbox.x2, det.bbox.y2);
        d[a] = ((x1 + x2) / 2.0) as f32;
        d[n + a] = ((y1 + y2) / 2.0) as f32;
        d[2 * n + a] = (x2 - x1) as f32;
        d[3 * n + a] = (y2 - y1) as f32;
        d[(4 + c) * n + a] = det.score as f32;
        if let Some(cs) = coeffs.get(a) {
            for (k, &v) in cs.iter().take(num_coeffs).enumerate() {
                d[(4 + num_classes + k) * n + a] = v;
            }
        }
    }
    RawTensor::new(vec![1, rows, n], d)
}
