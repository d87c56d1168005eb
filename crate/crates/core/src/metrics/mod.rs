//! Detection and segmentation evaluation.

mod bootstrap;
mod curve;
mod evaluate;
pub mod io;
mod matching;
mod overlap;
mod report;
mod sizes;

pub use bootstrap::{bootstrap_ci, ConfidenceInterval, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
pub use curve::{average_precision, f1_score, pr_curve, prf1, ApMode, PrCurve, PrPoint, Prf1};
pub use evaluate::{
    default_iou_thresholds, evaluate, map_sweep, map_sweep_with_mode, ByImage, EvalOptions, EvalReport,
    OperatingPoint, SizeReport, SweepResult, ThresholdAp,
};
pub use matching::{match_detections, MatchPair, MatchResult, OverlapKind};
pub use overlap::{iou_bbox, mask_overlap, MaskOverlap};
pub use io::{read_detections, write_detections, DetectionRecord, RleMask};
pub use report::format_eval_table;
pub(crate) use report::write_table;
pub use sizes::{median, quantile_sorted, stratify_by_size, SizeBucket, SizeBuckets};
