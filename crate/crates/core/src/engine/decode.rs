//! Exported YOLO head decoding.
//!
//! Detection head: `(1, 4 + C, N)`, rows `cx, cy, w, h` in model-input pixels
//! followed by `C` per-class scores. Segmentation heads append `M` mask
//! coefficient rows, `(1, 4 + C + M, N)`, and ship prototypes shaped
//! `(1, M, S/4, S/4)`.

use serde::{Deserialize, Serialize};

use super::preprocess::ScaleInfo;
use crate::error::{Error, Result};
use crate::geometry::{BBox, ClassId, Detection};
use crate::metrics::iou_bbox;
use crate::tensor::RawTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub conf_threshold: f64,
    pub nms_iou: f64,
    pub max_detections: usize,
    pub input_size: u32,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            conf_threshold: 0.25,
            nms_iou: 0.7,
            max_detections: 300,
            input_size: 640,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("conf_threshold", self.conf_threshold), ("nms_iou", self.nms_iou)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        if self.input_size == 0 {
            return Err(Error::InvalidInput("input_size must be > 0".into()));
        }
        Ok(())
    }
}

/// Row structure of a head tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub num_classes: usize,
    pub num_mask_coeffs: usize,
    pub num_anchors: usize,
}

impl HeadLayout {
    /// Layout of a detection head, or of a segmentation head when the
    /// prototype tensor is given.
    pub fn infer(head: &[usize], protos: Option<&[usize]>) -> Result<Self> {
        let [1, rows, n] = *head else {
            return Err(Error::ShapeMismatch(format!("head shape {head:?}, expected (1, 4+C[+M], N)")));
        };
        let nm = match protos {
            None => 0,
            Some(&[1, m, ph, pw]) if m > 0 && ph > 0 && pw > 0 => m,
            Some(p) => return Err(Error::ShapeMismatch(format!("prototype shape {p:?}, expected (1, M, H, W)"))),
        };
        if rows < 5 + nm || n == 0 {
            return Err(Error::ShapeMismatch(format!(
                "head shape {head:?} leaves no class rows (mask coefficients: {nm})"
            )));
        }
        Ok(Self {
            num_classes: rows - 4 - nm,
            num_mask_coeffs: nm,
            num_anchors: n,
        })
    }

    pub fn rows(&self) -> usize {
        4 + self.num_classes + self.num_mask_coeffs
    }
}

/// A decoded column that passed the confidence threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub detection: Detection,
    pub anchor: usize,
    pub coeffs: Vec<f32>,
}

/// Per column: best class score; columns below `conf_threshold` dropped;
/// center form to corners, mapped back to source pixels and clamped.
pub fn decode_candidates(head: &RawTensor, layout: &HeadLayout, cfg: &DecodeConfig, scales: &ScaleInfo) -> Result<Vec<Candidate>> {
    if head.shape() != [1, layout.rows(), layout.num_anchors] {
        return Err(Error::ShapeMismatch(format!(
            "head shape {:?} does not match layout {layout:?}",
            head.shape()
        )));
    }
    let n = layout.num_anchors;
    let d = head.data();
    let row = |r: usize| &d[r * n..(r + 1) * n];
    let (cxs, cys, ws, hs) = (row(0), row(1), row(2), row(3));
    let (fw, fh) = (scales.source_width as f64, scales.source_height as f64);
    let mut out = Vec::new();
    for a in 0..n {
        let mut best = (0usize, f32::NEG_INFINITY);
        for c in 0..layout.num_classes {
            let s = d[(4 + c) * n + a];
            if s > best.1 {
                best = (c, s);
            }
        }
        let score = best.1 as f64;
        if !(score >= cfg.conf_threshold) {
            continue;
        }
        let (cx, cy, w, h) = (cxs[a] as f64, cys[a] as f64, ws[a] as f64, hs[a] as f64);
        let (x1, y1) = scales.to_source(cx - w / 2.0, cy - h / 2.0);
        let (x2, y2) = scales.to_source(cx + w / 2.0, cy + h / 2.0);
        let bbox = BBox::new(x1, y1, x2, y2).clamp(fw, fh);
        let coeffs = (0..layout.num_mask_coeffs)
            .map(|k| d[(4 + layout.num_classes + k) * n + a])
            .collect();
        out.push(Candidate {
            detection: Detection::new(bbox, score.min(1.0), best.0 as ClassId),
            anchor: a,
            coeffs,
        });
    }
    Ok(out)
}

pub fn decode_detections(head: &RawTensor, cfg: &DecodeConfig, scales: &ScaleInfo) -> Result<Vec<Detection>> {
    let layout = HeadLayout::infer(head.shape(), None)?;
    Ok(decode_candidates(head, &layout, cfg, scales)?
        .into_iter()
        .map(|c| c.detection)
        .collect())
}

/// Indices kept by greedy class-aware NMS: descending score, ties to the
/// lower index, suppression when IoU > `iou_thr`, at most `max_det`.
pub fn nms_indices(dets: &[&Detection], iou_thr: f64, max_det: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.len() >= max_det {
            break;
        }
        let d = dets[i];
        let suppressed = kept
            .iter()
            .any(|&k| dets[k].class_id == d.class_id && iou_bbox(&dets[k].bbox, &d.bbox) > iou_thr);
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

pub fn nms(dets: &[Detection], iou_thr: f64, max_det: usize) -> Vec<Detection> {
    let refs: Vec<&Detection> = dets.iter().collect();
    nms_indices(&refs, iou_thr, max_det)
        .into_iter()
        .map(|i| dets[i].clone())
        .collect()
}

pub fn nms_candidates(cands: Vec<Candidate>, iou_thr: f64, max_det: usize) -> Vec<Candidate> {
    let refs: Vec<&Detection> = cands.iter().map(|c| &c.detection).collect();
    let keep = nms_indices(&refs, iou_thr, max_det);
    let mut slots: Vec<Option<Candidate>> = cands.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::synth::synthetic_head;
    use proptest::prelude::*;

    fn scales(w: u32, h: u32) -> ScaleInfo {
        ScaleInfo::new(w, h, 640).unwrap()
    }

    fn head(cols: &[[f32; 5]]) -> RawTensor {
        let n = cols.len();
        let mut d = vec![0f32; 5 * n];
        for (a, c) in cols.iter().enumerate() {
            for r in 0..5 {
                d[r * n + a] = c[r];
            }
        }
        RawTensor::new(vec![1, 5, n], d).unwrap()
    }

    #[test]
    fn full_frame_column() {
        let h = head(&[[320.0, 320.0, 640.0, 640.0, 0.9]]);
        let d = decode_detections(&h, &DecodeConfig::default(), &scales(640, 640)).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].bbox, BBox::new(0.0, 0.0, 640.0, 640.0));
        assert!((d[0].score - 0.9).abs() < 1e-7);
    }

    #[test]
    fn low_scores_dropped() {
        let h = head(&[[100.0, 100.0, 10.0, 10.0, 0.1]; 4]);
        assert!(decode_detections(&h, &DecodeConfig::default(), &scales(640, 640)).unwrap().is_empty());
    }

    #[test]
    fn argmax_class() {
        let h = RawTensor::new(vec![1, 6, 1], vec![320.0, 320.0, 64.0, 64.0, 0.3, 0.6]).unwrap();
        let d = decode_detections(&h, &DecodeConfig::default(), &scales(640, 640)).unwrap();
        assert_eq!(d[0].class_id, 1);
        assert!((d[0].score - 0.6).abs() < 1e-7);
    }

    #[test]
    fn layout_checks() {
        assert_eq!(HeadLayout::infer(&[1, 5, 8400], None).unwrap().num_classes, 1);
        let l = HeadLayout::infer(&[1, 37, 8400], Some(&[1, 32, 160, 160])).unwrap();
        assert_eq!((l.num_classes, l.num_mask_coeffs), (1, 32));
        assert!(HeadLayout::infer(&[1, 4, 10], None).is_err());
        assert!(HeadLayout::infer(&[2, 5, 10], None).is_err());
        assert!(HeadLayout::infer(&[1, 36, 10], Some(&[1, 32, 160, 160])).is_err());
        assert!(HeadLayout::infer(&[1, 37, 10], Some(&[1, 32, 160])).is_err());
    }

    #[test]
    fn nms_examples() {
        let a = Detection::new(BBox::new(0.0, 0.0, 10.0, 10.0), 0.9, 0);
        let b = Detection::new(BBox::new(0.0, 0.0, 10.0, 10.0), 0.8, 0);
        assert_eq!(nms(&[b.clone(), a.clone()], 0.7, 300), vec![a.clone()]);

        let c = Detection::new(BBox::new(1.0, 1.0, 11.0, 11.0), 0.8, 0);
        assert!((iou_bbox(&a.bbox, &c.bbox) - 81.0 / 119.0).abs() < 1e-12);
        assert_eq!(nms(&[a.clone(), c.clone()], 0.7, 300).len(), 2);

        let other = Detection::new(a.bbox, 0.8, 1);
        assert_eq!(nms(&[a.clone(), other], 0.7, 300).len(), 2);

        let many: Vec<_> = (0..10).map(|k| Detection::new(BBox::new(20.0 * k as f64, 0.0, 20.0 * k as f64 + 5.0, 5.0), 0.5, 0)).collect();
        let kept = nms(&many, 0.7, 3);
        assert_eq!(kept, many[..3].to_vec());
    }

    #[test]
    fn config_validation() {
        assert!(DecodeConfig::default().validate().is_ok());
        assert!(DecodeConfig { conf_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(DecodeConfig { nms_iou: 0.0, ..Default::default() }.validate().is_err());
        assert!(DecodeConfig { input_size: 0, ..Default::default() }.validate().is_err());
    }

    fn det_strategy() -> impl Strategy<Value = Detection> {
        (0.0..90.0f64, 0.0..90.0f64, 1.0..30.0f64, 1.0..30.0f64, 0.0..1.0f64, 0u32..2)
            .prop_map(|(x, y, w, h, s, c)| Detection::new(BBox::new(x, y, x + w, y + h), s, c))
    }

    proptest! {
        #[test]
        fn nms_survivor_property(dets in prop::collection::vec(det_strategy(), 0..40), thr in 0.1..0.9f64) {
            let kept = nms(&dets, thr, 300);
            for (i, a) in kept.iter().enumerate() {
                prop_assert!(dets.contains(a));
                for b in &kept[i + 1..] {
                    prop_assert!(a.score >= b.score);
                    if a.class_id == b.class_id {
                        prop_assert!(iou_bbox(&a.bbox, &b.bbox) <= thr);
                    }
                }
            }
            // every suppressed box overlaps a kept, higher-ranked box of its class
            for d in &dets {
                if !kept.contains(d) {
                    prop_assert!(kept.iter().any(|k| k.class_id == d.class_id && k.score >= d.score && iou_bbox(&k.bbox, &d.bbox) > thr));
                }
            }
        }

        #[test]
        fn decode_is_column_permutation_invariant(
            boxes in prop::collection::vec((10.0..500.0f64, 10.0..400.0f64, 5.0..100.0f64, 5.0..80.0f64, 0.3..1.0f64), 1..12),
            w in 50u32..2000, h in 50u32..2000, rot in 0usize..64,
        ) {
            let s = ScaleInfo::new(w, h, 640).unwrap();
            let dets: Vec<Detection> = boxes.iter().map(|&(x, y, bw, bh, sc)| {
                let x = x / 600.0 * w as f64;
                let y = y / 600.0 * h as f64;
                Detection::new(BBox::new(x, y, (x + bw).min(w as f64), (y + bh).min(h as f64)), sc, 0)
            }).collect();
            let t = synthetic_head(&dets, 1, 64, &s).unwrap();
            let n = 64;
            let mut perm = t.data().to_vec();
            for r in 0..5 {
                for a in 0..n {
                    perm[r * n + (a + rot) % n] = t.data()[r * n + a];
                }
            }
            let p = RawTensor::new(t.shape().to_vec(), perm).unwrap();
            let cfg = DecodeConfig::default();
            let key = |d: &Detection| (d.bbox.x1.to_bits(), d.bbox.y1.to_bits(), d.bbox.x2.to_bits(), d.bbox.y2.to_bits(), d.score.to_bits());
            let mut a: Vec<_> = decode_detections(&t, &cfg, &s).unwrap().iter().map(key).collect();
            let mut b: Vec<_> = decode_detections(&p, &cfg, &s).unwrap().iter().map(key).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
