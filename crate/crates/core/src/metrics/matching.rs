use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::overlap::{iou_bbox, mask_overlap};
use crate::error::{Error, Result};
use crate::geometry::{ClassId, Detection, GroundTruthInstance};

/// Which region overlap drives matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OverlapKind {
    Box,
    Mask,
}

impl std::str::FromStr for OverlapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(OverlapKind::Box),
            "mask" => Ok(OverlapKind::Mask),
            other => Err(Error::InvalidInput(format!("unknown overlap kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub detection: usize,
    pub ground_truth: Option<usize>,
    /// Overlap with the matched ground truth, or 0 when unmatched.
    pub iou: f64,
    pub score: f64,
    pub class_id: ClassId,
}

/// Per-image outcome of matching detections against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// One entry per detection, in input order.
    pub pairs: Vec<MatchPair>,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub num_ground_truth: usize,
}

/// Marks a class mismatch in the overlap matrix; never reaches a threshold in `(0, 1]`.
const CLASS_MISMATCH: f64 = -1.0;

/// Detection-by-ground-truth overlap matrix. Pairs of different classes hold
/// a negative sentinel.
pub(crate) fn overlap_matrix(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    kind: OverlapKind,
) -> Result<Vec<Vec<f64>>> {
    dets.iter()
        .map(|d| {
            gts.iter()
                .map(|g| {
                    if d.class_id != g.class_id {
                        return Ok(CLASS_MISMATCH);
                    }
                    match kind {
                        OverlapKind::Box => Ok(iou_bbox(&d.bbox, &g.bbox)),
                        OverlapKind::Mask => match (&d.mask, &g.mask) {
                            (Some(a), Some(b)) => Ok(mask_overlap(a, b)?.iou),
                            _ => Err(Error::MissingMask),
                        },
                    }
                })
                .collect()
        })
        .collect()
}

/// Descending score; exact score ties are ordered by class then box geometry so
/// the result does not depend on input order.
pub(crate) fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&dets[a], &dets[b]);
        db.score
            .total_cmp(&da.score)
            .then(da.class_id.cmp(&db.class_id))
            .then(da.bbox.x1.total_cmp(&db.bbox.x1))
            .then(da.bbox.y1.total_cmp(&db.bbox.y1))
            .then(da.bbox.x2.total_cmp(&db.bbox.x2))
            .then(da.bbox.y2.total_cmp(&db.bbox.y2))
            .then(Ordering::Equal)
    });
    order
}

/// Greedy assignment: each detection, in `order`, takes its best still-unmatched
/// ground truth if that overlap reaches `thr`. Equal overlaps go to the lower
/// ground-truth index.
pub(crate) fn greedy_assign(
    order: &[usize],
    ious: &[Vec<f64>],
    n_gt: usize,
    thr: f64,
) -> Vec<Option<usize>> {
    let mut taken = vec![false; n_gt];
    let mut assigned = vec![None; ious.len()];
    for &d in order {
        let mut best: Option<(usize, f64)> = None;
        for (g, &iou) in ious[d].iter().enumerate() {
            if taken[g] || iou < thr {
                continue;
            }
            if best.is_none_or(|(_, b)| iou > b) {
                best = Some((g, iou));
            }
        }
        if let Some((g, _)) = best {
            taken[g] = true;
            assigned[d] = Some(g);
        }
    }
    assigned
}

pub(crate) fn check_threshold(thr: f64) -> Result<()> {
    if thr > 0.0 && thr <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("IoU threshold {thr} outside (0, 1]")))
    }
}

/// Matches one image's detections to its ground truth at `iou_thr`.
pub fn match_detections(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    iou_thr: f64,
    kind: OverlapKind,
) -> Result<MatchResult> {
    check_threshold(iou_thr)?;
    let ious = overlap_matrix(dets, gts, kind)?;
    let assigned = greedy_assign(&score_order(dets), &ious, gts.len(), iou_thr);
    let pairs: Vec<MatchPair> = dets
        .iter()
        .enumerate()
        .map(|(i, d)| MatchPair {
            detection: i,
            ground_truth: assigned[i],
            iou: assigned[i].map_or(0.0, |g| ious[i][g]),
            score: d.score,
            class_id: d.class_id,
        })
        .collect();
    let tp = pairs.iter().filter(|p| p.ground_truth.is_some()).count();
    Ok(MatchResult {
        fp: pairs.len() - tp,
        fn_: gts.len() - tp,
        tp,
        pairs,
        num_ground_truth: gts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn det(x1: f64, y1: f64, x2: f64, y2: f64, s: f64) -> Detection {
        Detection::new(BBox::new(x1, y1, x2, y2), s, 0)
    }

    fn gt(x1: f64, y1: f64, x2: f64, y2: f64) -> GroundTruthInstance {
        GroundTruthInstance::new("img", "subj", BBox::new(x1, y1, x2, y2))
    }

    /// Maximum number of pairs with IoU >= thr over every injective assignment.
    fn exhaustive_max_tp(ious: &[Vec<f64>], thr: f64) -> usize {
        fn rec(d: usize, ious: &[Vec<f64>], used: &mut Vec<bool>, thr: f64) -> usize {
            if d == ious.len() {
                return 0;
            }
            let mut best = rec(d + 1, ious, used, thr);
            for g in 0..used.len() {
                if !used[g] && ious[d][g] >= thr {
                    used[g] = true;
                    best = best.max(1 + rec(d + 1, ious, used, thr));
                    used[g] = false;
                }
            }
            best
        }
        let n_gt = ious.first().map_or(0, |r| r.len());
        rec(0, ious, &mut vec![false; n_gt], thr)
    }

    #[test]
    fn single_match() {
        // 10x10 GT vs 10x8 det: IoU 0.8
        let r = match_detections(&[det(0.0, 0.0, 10.0, 8.0, 0.9)], &[gt(0.0, 0.0, 10.0, 10.0)], 0.5, OverlapKind::Box)
            .unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 0, 0));
        assert!((r.pairs[0].iou - 0.8).abs() < 1e-12);
    }

    #[test]
    fn duplicate_detection_is_fp() {
        let dets = [det(0.0, 0.0, 10.0, 9.0, 0.7), det(0.0, 0.0, 10.0, 8.0, 0.6)];
        let gts = [gt(0.0, 0.0, 10.0, 10.0)];
        let r = match_detections(&dets, &gts, 0.5, OverlapKind::Box).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 0));
        assert_eq!(r.pairs[0].ground_truth, Some(0));
        let ious = overlap_matrix(&dets, &gts, OverlapKind::Box).unwrap();
        assert_eq!(exhaustive_max_tp(&ious, 0.5), r.tp);
    }

    #[test]
    fn no_detections() {
        let r = match_detections(&[], &[gt(0.0, 0.0, 1.0, 1.0), gt(2.0, 2.0, 3.0, 3.0)], 0.5, OverlapKind::Box).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 0, 2));
    }

    #[test]
    fn classes_never_match_across() {
        let mut d = det(0.0, 0.0, 10.0, 10.0, 0.9);
        d.class_id = 1;
        let r = match_detections(&[d], &[gt(0.0, 0.0, 10.0, 10.0)], 0.5, OverlapKind::Box).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (0, 1, 1));
    }

    #[test]
    fn iou_ties_go_to_lower_gt_index() {
        let gts = [gt(0.0, 0.0, 10.0, 10.0), gt(0.0, 0.0, 10.0, 10.0)];
        let r = match_detections(&[det(0.0, 0.0, 10.0, 10.0, 0.5)], &gts, 0.5, OverlapKind::Box).unwrap();
        assert_eq!(r.pairs[0].ground_truth, Some(0));
    }

    #[test]
    fn mask_mode_requires_masks() {
        let r = match_detections(&[det(0.0, 0.0, 1.0, 1.0, 0.5)], &[gt(0.0, 0.0, 1.0, 1.0)], 0.5, OverlapKind::Mask);
        assert!(matches!(r, Err(Error::MissingMask)));
        assert!(match_detections(&[], &[], 0.0, OverlapKind::Box).is_err());
    }
}
