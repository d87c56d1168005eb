use serde::{Deserialize, Serialize};

use super::matching::MatchResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
    pub score_threshold: f64,
}

/// Precision/recall at every distinct score threshold, highest score first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub num_ground_truth: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Exact area under the monotone precision envelope.
    #[default]
    AllPoints,
    /// Mean envelope precision at recall 0.00, 0.01, …, 1.00.
    Interp101,
}

/// Pools per-image matches into one dataset-level curve.
pub fn pr_curve(all_matches: &[MatchResult]) -> Result<PrCurve> {
    let n_gt = all_matches.iter().map(|m| m.num_ground_truth).sum();
    let scored = all_matches
        .iter()
        .flat_map(|m| m.pairs.iter().map(|p| (p.score, p.ground_truth.is_some())))
        .collect();
    curve_from_scored(scored, n_gt)
}

/// Builds a curve from `(score, is_true_positive)` pairs.
pub(crate) fn curve_from_scored(mut scored: Vec<(f64, bool)>, n_gt: usize) -> Result<PrCurve> {
    if n_gt == 0 {
        return Err(Error::UndefinedRecall);
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < scored.len() {
        let s = scored[i].0;
        while i < scored.len() && scored[i].0 == s {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(PrPoint {
            recall: tp as f64 / n_gt as f64,
            precision: tp as f64 / (tp + fp) as f64,
            score_threshold: s,
        });
    }
    Ok(PrCurve {
        points,
        num_ground_truth: n_gt,
    })
}

/// Running maximum of precision from the high-recall end.
fn precision_envelope(curve: &PrCurve) -> Vec<f64> {
    let mut env: Vec<f64> = curve.points.iter().map(|p| p.precision).collect();
    for i in (0..env.len().saturating_sub(1)).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    env
}

pub fn average_precision(curve: &PrCurve, mode: ApMode) -> f64 {
    let env = precision_envelope(curve);
    match mode {
        ApMode::AllPoints => {
            let mut prev_recall = 0.0;
            let mut ap = 0.0;
            for (p, e) in curve.points.iter().zip(&env) {
                ap += (p.recall - prev_recall) * e;
                prev_recall = p.recall;
            }
            ap
        }
        ApMode::Interp101 => {
            let mut sum = 0.0;
            let mut idx = 0;
            for k in 0..=100 {
                let r = k as f64 / 100.0;
                while idx < curve.points.len() && curve.points[idx].recall < r {
                    idx += 1;
                }
                if idx < env.len() {
                    sum += env[idx];
                }
            }
            sum / 101.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall <= 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Precision, sensitivity and F1 from confusion counts; zero denominators give 0.
pub fn prf1(tp: usize, fp: usize, fn_: usize) -> Prf1 {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Prf1 {
        precision,
        recall,
        f1: f1_score(precision, recall),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_example() -> PrCurve {
        curve_from_scored(vec![(0.9, true), (0.8, false), (0.7, true)], 2).unwrap()
    }

    #[test]
    fn worked_example_points() {
        let c = worked_example();
        let pts: Vec<(f64, f64)> = c.points.iter().map(|p| (p.recall, p.precision)).collect();
        assert_eq!(pts[0], (0.5, 1.0));
        assert_eq!(pts[1], (0.5, 0.5));
        assert_eq!(pts[2].0, 1.0);
        assert!((pts[2].1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn worked_example_ap() {
        let ap = average_precision(&worked_example(), ApMode::AllPoints);
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn trivial_curves() {
        let c = curve_from_scored(vec![(0.4, true)], 1).unwrap();
        assert_eq!(c.points, vec![PrPoint { recall: 1.0, precision: 1.0, score_threshold: 0.4 }]);
        assert_eq!(average_precision(&c, ApMode::AllPoints), 1.0);
        assert_eq!(average_precision(&c, ApMode::Interp101), 1.0);

        let fps = curve_from_scored(vec![(0.9, false), (0.5, false)], 3).unwrap();
        assert!(fps.points.iter().all(|p| p.precision == 0.0));

        let empty = curve_from_scored(vec![], 2).unwrap();
        assert_eq!(average_precision(&empty, ApMode::AllPoints), 0.0);
        assert_eq!(average_precision(&empty, ApMode::Interp101), 0.0);

        assert!(matches!(curve_from_scored(vec![(0.9, false)], 0), Err(Error::UndefinedRecall)));
    }

    #[test]
    fn tied_scores_share_one_point() {
        let c = curve_from_scored(vec![(0.5, true), (0.5, false), (0.5, true)], 4).unwrap();
        assert_eq!(c.points.len(), 1);
        assert_eq!(c.points[0].recall, 0.5);
    }

    #[test]
    fn prf1_examples() {
        assert_eq!(prf1(10, 0, 0), Prf1 { precision: 1.0, recall: 1.0, f1: 1.0 });
        assert_eq!(prf1(0, 0, 5), Prf1 { precision: 0.0, recall: 0.0, f1: 0.0 });
        let f1 = f1_score(0.94, 0.97);
        assert!((f1 - 0.954_764).abs() < 1e-6);
    }
}
