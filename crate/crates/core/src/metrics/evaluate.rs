//! Dataset-level evaluation: threshold sweeps, size strata, segmentation
//! overlap and bootstrap intervals.
//!
//! Matching is computed once per image and IoU threshold; every aggregate
//! (including each bootstrap replicate) is then a cheap pooling pass over
//! those per-image assignments.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bootstrap::{check_params, resample_sets, summarize, ConfidenceInterval, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use super::curve::{average_precision, curve_from_scored, f1_score, ApMode};
use super::matching::{check_threshold, greedy_assign, overlap_matrix, score_order, OverlapKind};
use super::overlap::{mask_overlap, MaskOverlap};
use super::sizes::{median, stratify_by_size, SizeBucket, SizeBuckets};
use crate::error::{Error, Result};
use crate::geometry::{ClassId, Detection, GroundTruthInstance};

pub type ByImage<T> = BTreeMap<String, Vec<T>>;

/// IoU thresholds 0.50, 0.55, …, 0.95.
pub fn default_iou_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub iou_threshold: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub map50: f64,
    pub map50_95: f64,
    pub per_threshold: Vec<ThresholdAp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub kind: OverlapKind,
    pub iou_thresholds: Vec<f64>,
    pub ap_mode: ApMode,
    /// 0 disables confidence intervals.
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            kind: OverlapKind::Box,
            iou_thresholds: default_iou_thresholds(),
            ap_mode: ApMode::AllPoints,
            bootstrap_resamples: DEFAULT_RESAMPLES,
            confidence_level: DEFAULT_LEVEL,
            seed: 0x5eed,
        }
    }
}

/// Precision/recall/F1 at the score threshold maximizing F1 (IoU 0.50).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub score_threshold: Option<f64>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub bucket: SizeBucket,
    pub num_ground_truth: usize,
    pub map50_95: Option<f64>,
    pub dice_median: Option<f64>,
    pub iou_median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: OverlapKind,
    pub ap_mode: ApMode,
    pub num_images: usize,
    pub num_ground_truth: usize,
    pub num_detections: usize,
    pub map50: f64,
    pub map50_95: f64,
    pub ap_per_threshold: Vec<ThresholdAp>,
    pub operating_point: OperatingPoint,
    pub size_buckets: SizeBuckets,
    pub by_size: Vec<SizeReport>,
    pub dice_median: Option<f64>,
    pub iou_median: Option<f64>,
    pub bootstrap_resamples: usize,
    pub confidence_level: f64,
    /// Keyed by statistic: `map50`, `map50_95`, `precision`, `recall`, `f1`,
    /// `map50_95_S`, `dice`, `iou_L`, …
    pub confidence_intervals: BTreeMap<String, ConfidenceInterval>,
}

struct PreparedImage {
    det_class: Vec<ClassId>,
    det_score: Vec<f64>,
    det_bucket: Vec<SizeBucket>,
    gt_class: Vec<ClassId>,
    gt_bucket: Vec<SizeBucket>,
    /// `[threshold][detection]` → matched ground truth.
    assigned: Vec<Vec<Option<usize>>>,
    /// Per ground truth: overlap with its paired detection (mask mode only).
    seg: Vec<MaskOverlap>,
}

struct Prepared {
    images: Vec<PreparedImage>,
    n_thresholds: usize,
    idx50: usize,
    mode: ApMode,
}

#[derive(Default)]
struct SampleStats {
    map50: Option<f64>,
    map50_95: Option<f64>,
    op: Option<OperatingPoint>,
    size_map: [Option<f64>; 3],
    dice: Option<f64>,
    iou: Option<f64>,
    size_dice: [Option<f64>; 3],
    size_iou: [Option<f64>; 3],
}

fn validate_thresholds(thresholds: &[f64]) -> Result<usize> {
    if thresholds.is_empty() {
        return Err(Error::InvalidInput("empty IoU threshold list".into()));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    thresholds
        .iter()
        .position(|&t| (t - 0.5).abs() < 1e-12)
        .ok_or_else(|| Error::InvalidInput("IoU thresholds must include 0.50".into()))
}

fn prepare(
    dets: &ByImage<Detection>,
    gts: &ByImage<GroundTruthInstance>,
    thresholds: &[f64],
    kind: OverlapKind,
    mode: ApMode,
    buckets: Option<SizeBuckets>,
    with_seg: bool,
) -> Result<Prepared> {
    let idx50 = validate_thresholds(thresholds)?;
    if let Some(id) = dets.keys().find(|k| !gts.contains_key(*k)) {
        return Err(Error::UnknownImage(id.clone()));
    }
    static NO_DETS: Vec<Detection> = Vec::new();
    let entries: Vec<(&Vec<Detection>, &Vec<GroundTruthInstance>)> = gts
        .iter()
        .map(|(id, g)| (dets.get(id).unwrap_or(&NO_DETS), g))
        .collect();
    let images = entries
        .par_iter()
        .map(|(d, g)| prepare_image(d, g, thresholds, kind, buckets, with_seg))
        .collect::<Result<Vec<_>>>()?;
    Ok(Prepared {
        images,
        n_thresholds: thresholds.len(),
        idx50,
        mode,
    })
}

fn prepare_image(
    dets: &[Detection],
    gts: &[GroundTruthInstance],
    thresholds: &[f64],
    kind: OverlapKind,
    buckets: Option<SizeBuckets>,
    with_seg: bool,
) -> Result<PreparedImage> {
    let ious = overlap_matrix(dets, gts, kind)?;
    let order = score_order(dets);
    let assigned = thresholds
        .iter()
        .map(|&t| greedy_assign(&order, &ious, gts.len(), t))
        .collect();
    let bucket_of = |area: f64| buckets.map_or(SizeBucket::M, |b| b.bucket(area));
    let seg = if with_seg {
        // Pair each ground truth with the highest-scoring detection that overlaps it at all.
        let pairing = greedy_assign(&order, &ious, gts.len(), f64::MIN_POSITIVE);
        let mut seg = vec![MaskOverlap { iou: 0.0, dice: 0.0 }; gts.len()];
        for (d, g) in pairing.iter().enumerate() {
            if let Some(g) = *g {
                seg[g] = match (&dets[d].mask, &gts[g].mask) {
                    (Some(a), Some(b)) => mask_overlap(a, b)?,
                    _ => return Err(Error::MissingMask),
                };
            }
        }
        seg
    } else {
        Vec::new()
    };
    Ok(PreparedImage {
        det_class: dets.iter().map(|d| d.class_id).collect(),
        det_score: dets.iter().map(|d| d.score).collect(),
        det_bucket: dets.iter().map(|d| bucket_of(d.bbox.area())).collect(),
        gt_class: gts.iter().map(|g| g.class_id).collect(),
        gt_bucket: gts.iter().map(|g| bucket_of(g.bbox.area())).collect(),
        assigned,
        seg,
    })
}

impl Prepared {
    /// Mean over classes (with ground truth) of AP at threshold `t`.
    ///
    /// With a size bucket, only ground truths in the bucket count; detections
    /// matched to other-bucket ground truths are ignored and unmatched
    /// detections count as false positives only if their own area falls in
    /// the bucket.
    fn class_ap(&self, idxs: &[usize], t: usize, bucket: Option<SizeBucket>) -> Option<f64> {
        let mut per_class: BTreeMap<ClassId, (Vec<(f64, bool)>, usize)> = BTreeMap::new();
        for &i in idxs {
            let img = &self.images[i];
            for (g, &c) in img.gt_class.iter().enumerate() {
                if bucket.is_none_or(|b| img.gt_bucket[g] == b) {
                    per_class.entry(c).or_default().1 += 1;
                }
            }
            for (d, assigned) in img.assigned[t].iter().enumerate() {
                let tp = match (bucket, assigned) {
                    (None, a) => Some(a.is_some()),
                    (Some(b), Some(g)) => (img.gt_bucket[*g] == b).then_some(true),
                    (Some(b), None) => (img.det_bucket[d] == b).then_some(false),
                };
                if let Some(tp) = tp {
                    per_class
                        .entry(img.det_class[d])
                        .or_default()
                        .0
                        .push((img.det_score[d], tp));
                }
            }
        }
        let aps: Vec<f64> = per_class
            .into_values()
            .filter(|(_, n)| *n > 0)
            .map(|(scored, n)| {
                let curve = curve_from_scored(scored, n).expect("n > 0");
                average_precision(&curve, self.mode)
            })
            .collect();
        (!aps.is_empty()).then(|| aps.iter().sum::<f64>() / aps.len() as f64)
    }

    fn sweep(&self, idxs: &[usize], bucket: Option<SizeBucket>) -> Option<Vec<f64>> {
        (0..self.n_thresholds).map(|t| self.class_ap(idxs, t, bucket)).collect()
    }

    fn operating_point(&self, idxs: &[usize]) -> Option<OperatingPoint> {
        let mut scored = Vec::new();
        let mut n_gt = 0;
        for &i in idxs {
            let img = &self.images[i];
            n_gt += img.gt_class.len();
            for (d, a) in img.assigned[self.idx50].iter().enumerate() {
                scored.push((img.det_score[d], a.is_some()));
            }
        }
        let curve = curve_from_scored(scored, n_gt).ok()?;
        let mut best = OperatingPoint {
            score_threshold: None,
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        };
        for p in &curve.points {
            let f1 = f1_score(p.precision, p.recall);
            if best.score_threshold.is_none() || f1 > best.f1 {
                best = OperatingPoint {
                    score_threshold: Some(p.score_threshold),
                    precision: p.precision,
                    recall: p.recall,
                    f1,
                };
            }
        }
        Some(best)
    }

    fn seg_median(&self, idxs: &[usize], bucket: Option<SizeBucket>, pick: fn(&MaskOverlap) -> f64) -> Option<f64> {
        let values: Vec<f64> = idxs
            .iter()
            .flat_map(|&i| {
                let img = &self.images[i];
                img.seg
                    .iter()
                    .enumerate()
                    .filter(move |(g, _)| bucket.is_none_or(|b| img.gt_bucket[*g] == b))
                    .map(|(_, o)| pick(o))
            })
            .collect();
        median(&values)
    }

    fn stats(&self, idxs: &[usize], with_seg: bool) -> SampleStats {
        let mut s = SampleStats::default();
        if let Some(aps) = self.sweep(idxs, None) {
            s.map50 = Some(aps[self.idx50]);
            s.map50_95 = Some(aps.iter().sum::<f64>() / aps.len() as f64);
        }
        s.op = self.operating_point(idxs);
        for (k, b) in SizeBucket::ALL.into_iter().enumerate() {
            s.size_map[k] = self
                .sweep(idxs, Some(b))
                .map(|aps| aps.iter().sum::<f64>() / aps.len() as f64);
            if with_seg {
                s.size_dice[k] = self.seg_median(idxs, Some(b), |o| o.dice);
                s.size_iou[k] = self.seg_median(idxs, Some(b), |o| o.iou);
            }
        }
        if with_seg {
            s.dice = self.seg_median(idxs, None, |o| o.dice);
            s.iou = self.seg_median(idxs, None, |o| o.iou);
        }
        s
    }
}

impl SampleStats {
    fn named(&self) -> Vec<(String, Option<f64>)> {
        let mut v = vec![
            ("map50".to_string(), self.map50),
            ("map50_95".to_string(), self.map50_95),
            ("precision".to_string(), self.op.map(|o| o.precision)),
            ("recall".to_string(), self.op.map(|o| o.recall)),
            ("f1".to_string(), self.op.map(|o| o.f1)),
            ("dice".to_string(), self.dice),
            ("iou".to_string(), self.iou),
        ];
        for (k, b) in SizeBucket::ALL.iter().enumerate() {
            v.push((format!("map50_95_{b:?}"), self.size_map[k]));
            v.push((format!("dice_{b:?}"), self.size_dice[k]));
            v.push((format!("iou_{b:?}"), self.size_iou[k]));
        }
        v
    }
}

/// mAP at 0.50 and averaged over `thresholds` (which must contain 0.50).
pub fn map_sweep(
    dets: &ByImage<Detection>,
    gts: &ByImage<GroundTruthInstance>,
    thresholds: &[f64],
    kind: OverlapKind,
) -> Result<SweepResult> {
    map_sweep_with_mode(dets, gts, thresholds, kind, ApMode::AllPoints)
}

pub fn map_sweep_with_mode(
    dets: &ByImage<Detection>,
    gts: &ByImage<GroundTruthInstance>,
    thresholds: &[f64],
    kind: OverlapKind,
    mode: ApMode,
) -> Result<SweepResult> {
    let prepared = prepare(dets, gts, thresholds, kind, mode, None, false)?;
    let all: Vec<usize> = (0..prepared.images.len()).collect();
    let aps = prepared.sweep(&all, None).ok_or(Error::UndefinedRecall)?;
    Ok(SweepResult {
        map50: aps[prepared.idx50],
        map50_95: aps.iter().sum::<f64>() / aps.len() as f64,
        per_threshold: thresholds
            .iter()
            .zip(&aps)
            .map(|(&iou_threshold, &ap)| ThresholdAp { iou_threshold, ap })
            .collect(),
    })
}

/// Full evaluation of a detection set against ground truth.
///
/// Every image that should count (including images without ground truth)
/// must appear in `gts`.
pub fn evaluate(
    dets: &ByImage<Detection>,
    gts: &ByImage<GroundTruthInstance>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if opts.bootstrap_resamples > 0 {
        check_params(opts.bootstrap_resamples, opts.confidence_level)?;
    }
    if let Some(id) = dets.keys().find(|k| !gts.contains_key(*k)) {
        return Err(Error::UnknownImage(id.clone()));
    }
    let all_gts: Vec<GroundTruthInstance> = gts.values().flatten().cloned().collect();
    if all_gts.is_empty() {
        return Err(Error::UndefinedRecall);
    }
    let buckets = stratify_by_size(&all_gts)?;
    let with_seg = opts.kind == OverlapKind::Mask;
    let prepared = prepare(dets, gts, &opts.iou_thresholds, opts.kind, opts.ap_mode, Some(buckets), with_seg)?;
    let all: Vec<usize> = (0..prepared.images.len()).collect();

    let aps = prepared.sweep(&all, None).ok_or(Error::UndefinedRecall)?;
    let point = prepared.stats(&all, with_seg);

    let by_size = SizeBucket::ALL
        .iter()
        .enumerate()
        .map(|(k, &b)| SizeReport {
            bucket: b,
            num_ground_truth: prepared
                .images
                .iter()
                .map(|i| i.gt_bucket.iter().filter(|&&x| x == b).count())
                .sum(),
            map50_95: point.size_map[k],
            dice_median: point.size_dice[k],
            iou_median: point.size_iou[k],
        })
        .collect();

    let mut confidence_intervals = BTreeMap::new();
    if opts.bootstrap_resamples > 0 {
        let sets = resample_sets(all.len(), opts.bootstrap_resamples, opts.seed);
        let replicates: Vec<Vec<(String, Option<f64>)>> = sets
            .par_iter()
            .map(|idx| prepared.stats(idx, with_seg).named())
            .collect();
        let mut columns: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for rep in replicates {
            for (name, v) in rep {
                let col = columns.entry(name).or_default();
                if let Some(v) = v {
                    col.push(v);
                }
            }
        }
        for (name, col) in columns {
            if let Some(ci) = summarize(col, opts.confidence_level) {
                confidence_intervals.insert(name, ci);
            }
        }
    }

    Ok(EvalReport {
        kind: opts.kind,
        ap_mode: opts.ap_mode,
        num_images: gts.len(),
        num_ground_truth: all_gts.len(),
        num_detections: dets.values().map(Vec::len).sum(),
        map50: aps[prepared.idx50],
        map50_95: aps.iter().sum::<f64>() / aps.len() as f64,
        ap_per_threshold: opts
            .iou_thresholds
            .iter()
            .zip(&aps)
            .map(|(&iou_threshold, &ap)| ThresholdAp { iou_threshold, ap })
            .collect(),
        operating_point: point.op.expect("ground truth present"),
        size_buckets: buckets,
        by_size,
        dice_median: point.dice,
        iou_median: point.iou,
        bootstrap_resamples: opts.bootstrap_resamples,
        confidence_level: opts.confidence_level,
        confidence_intervals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox, BitMask};

    fn gt(img: &str, b: BBox) -> GroundTruthInstance {
        GroundTruthInstance::new(img, "s", b)
    }

    /// Two images, two GTs; P1 (0.9, TP), P2 (0.8, FP), P3 (0.7, TP).
    fn toy() -> (ByImage<Detection>, ByImage<GroundTruthInstance>) {
        let g1 = BBox::new(10.0, 10.0, 50.0, 50.0);
        let g2 = BBox::new(100.0, 100.0, 160.0, 140.0);
        let mut dets = ByImage::new();
        dets.insert(
            "a".into(),
            vec![Detection::new(g1, 0.9, 0), Detection::new(BBox::new(200.0, 200.0, 220.0, 220.0), 0.8, 0)],
        );
        dets.insert("b".into(), vec![Detection::new(g2, 0.7, 0)]);
        let mut gts = ByImage::new();
        gts.insert("a".into(), vec![gt("a", g1)]);
        gts.insert("b".into(), vec![gt("b", g2)]);
        (dets, gts)
    }

    #[test]
    fn default_thresholds() {
        let t = default_iou_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.50);
        assert_eq!(t[9], 0.95);
        for (k, v) in t.iter().enumerate() {
            assert_eq!(*v, [0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95][k]);
        }
    }

    #[test]
    fn toy_map50() {
        let (dets, gts) = toy();
        let r = map_sweep(&dets, &gts, &default_iou_thresholds(), OverlapKind::Box).unwrap();
        assert!((r.map50 - 5.0 / 6.0).abs() < 1e-12);
        let opts = EvalOptions { bootstrap_resamples: 0, ..Default::default() };
        let rep = evaluate(&dets, &gts, &opts).unwrap();
        assert!((rep.map50 - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(rep.operating_point.recall, 1.0);
        assert!((rep.operating_point.precision - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_iou_detector() {
        // Each detection overlaps its GT at exactly IoU 0.6.
        let mut dets = ByImage::new();
        let mut gts = ByImage::new();
        for k in 0..4 {
            let id = format!("img{k}");
            let g = BBox::new(0.0, 0.0, 10.0, 10.0);
            dets.insert(id.clone(), vec![Detection::new(BBox::new(0.0, 0.0, 10.0, 6.0), 0.5 + k as f64 / 10.0, 0)]);
            gts.insert(id.clone(), vec![gt(&id, g)]);
        }
        let r = map_sweep(&dets, &gts, &default_iou_thresholds(), OverlapKind::Box).unwrap();
        let aps: Vec<f64> = r.per_threshold.iter().map(|t| t.ap).collect();
        assert_eq!(aps, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((r.map50_95 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_everything_one() {
        let mut dets = ByImage::new();
        let mut gts = ByImage::new();
        for (k, side) in [8.0, 20.0, 40.0].into_iter().enumerate() {
            let id = format!("p{k}");
            let b = BBox::new(5.0, 5.0, 5.0 + side, 5.0 + side);
            let mask = BitMask::from_box(&b, 64, 64);
            let mut d = Detection::new(b, 0.9, 0);
            d.mask = Some(mask.clone());
            let mut g = gt(&id, b);
            g.mask = Some(mask);
            dets.insert(id.clone(), vec![d]);
            gts.insert(id, vec![g]);
        }
        let opts = EvalOptions { kind: OverlapKind::Mask, bootstrap_resamples: 50, ..Default::default() };
        let r = evaluate(&dets, &gts, &opts).unwrap();
        assert_eq!((r.map50, r.map50_95), (1.0, 1.0));
        assert_eq!(r.operating_point.f1, 1.0);
        assert_eq!((r.dice_median, r.iou_median), (Some(1.0), Some(1.0)));
        for s in &r.by_size {
            assert_eq!(s.num_ground_truth, 1);
            assert_eq!(s.map50_95, Some(1.0));
        }
        for ci in r.confidence_intervals.values() {
            assert_eq!((ci.median, ci.lo, ci.hi), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn half_dice_prediction() {
        let g = BBox::new(0.0, 0.0, 10.0, 10.0);
        let p = BBox::new(5.0, 0.0, 15.0, 10.0);
        let mut d = Detection::new(p, 0.8, 0);
        d.mask = Some(BitMask::from_box(&p, 32, 32));
        let mut t = gt("x", g);
        t.mask = Some(BitMask::from_box(&g, 32, 32));
        let dets = ByImage::from([("x".to_string(), vec![d])]);
        let gts = ByImage::from([("x".to_string(), vec![t])]);
        let opts = EvalOptions { kind: OverlapKind::Mask, bootstrap_resamples: 0, ..Default::default() };
        let r = evaluate(&dets, &gts, &opts).unwrap();
        assert_eq!(r.dice_median, Some(0.5));
        assert!((r.iou_median.unwrap() - 1.0 / 3.0).abs() < 1e-15);
        // IoU 1/3 is below 0.5: the prediction is a false positive for mAP.
        assert_eq!(r.map50, 0.0);
    }

    #[test]
    fn unmatched_gt_contributes_zero_dice() {
        let g1 = BBox::new(0.0, 0.0, 10.0, 10.0);
        let g2 = BBox::new(20.0, 20.0, 30.0, 30.0);
        let mut d = Detection::new(g1, 0.8, 0);
        d.mask = Some(BitMask::from_box(&g1, 32, 32));
        let mut t1 = gt("x", g1);
        t1.mask = Some(BitMask::from_box(&g1, 32, 32));
        let mut t2 = gt("x", g2);
        t2.mask = Some(BitMask::from_box(&g2, 32, 32));
        let dets = ByImage::from([("x".to_string(), vec![d])]);
        let gts = ByImage::from([("x".to_string(), vec![t1, t2])]);
        let opts = EvalOptions { kind: OverlapKind::Mask, bootstrap_resamples: 0, ..Default::default() };
        let r = evaluate(&dets, &gts, &opts).unwrap();
        assert_eq!(r.dice_median, Some(0.5));
    }

    #[test]
    fn errors_propagate() {
        let (dets, _) = toy();
        let gts = ByImage::from([("a".to_string(), vec![])]);
        assert!(matches!(evaluate(&dets, &gts, &EvalOptions::default()), Err(Error::UnknownImage(_))));
        let empty: ByImage<GroundTruthInstance> = ByImage::from([("a".to_string(), vec![]), ("b".to_string(), vec![])]);
        assert!(matches!(evaluate(&dets, &empty, &EvalOptions::default()), Err(Error::UndefinedRecall)));
        let (dets, gts) = toy();
        assert!(map_sweep(&dets, &gts, &[0.6, 0.7], OverlapKind::Box).is_err());
        assert!(map_sweep(&dets, &gts, &[], OverlapKind::Box).is_err());
    }

    #[test]
    fn bootstrap_intervals_are_ordered() {
        let (dets, gts) = toy();
        let r = evaluate(&dets, &gts, &EvalOptions { bootstrap_resamples: 200, ..Default::default() }).unwrap();
        assert!(!r.confidence_intervals.is_empty());
        for ci in r.confidence_intervals.values() {
            assert!(ci.lo <= ci.median && ci.median <= ci.hi);
            assert!((0.0..=1.0).contains(&ci.lo) && ci.hi <= 1.0);
        }
        let again = evaluate(&dets, &gts, &EvalOptions { bootstrap_resamples: 200, ..Default::default() }).unwrap();
        assert_eq!(r, again);
    }
}
