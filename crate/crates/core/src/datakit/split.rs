use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ImageRecord, Split};

/// Train / valid / test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            valid: 0.1,
            test: 0.2,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let r = Self { train, valid, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.as_array();
        if v.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::InvalidInput(format!("split ratios {v:?} must lie in [0, 1]")));
        }
        if (v.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("split ratios {v:?} must sum to 1")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.valid, self.test]
    }

    pub fn get(&self, s: Split) -> f64 {
        match s {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
            Split::Unassigned => 0.0,
        }
    }
}

impl std::str::FromStr for SplitRatios {
    type Err = Error;

    /// Accepts `70:10:20` or `0.7,0.1,0.2`; integer triples are normalized.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split([':', ','])
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidInput(format!("cannot parse split ratios `{s}`")))?;
        let [a, b, c]: [f64; 3] = parts
            .try_into()
            .map_err(|_| Error::InvalidInput(format!("split ratios `{s}` need three parts")))?;
        let total = a + b + c;
        if !(total > 0.0) || a < 0.0 || b < 0.0 || c < 0.0 {
            return Err(Error::InvalidInput(format!("split ratios `{s}` must be non-negative")));
        }
        SplitRatios::new(a / total, b / total, c / total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub assignment: BTreeMap<String, Split>,
    pub ratios: SplitRatios,
}

impl SplitPlan {
    pub fn split_of(&self, subject_id: &str) -> Split {
        self.assignment.get(subject_id).copied().unwrap_or(Split::Unassigned)
    }

    /// Copies of `records` with `split` filled from the plan.
    pub fn apply(&self, records: &[ImageRecord]) -> Vec<ImageRecord> {
        records
            .iter()
            .map(|r| ImageRecord {
                split: self.split_of(&r.subject_id),
                ..r.clone()
            })
            .collect()
    }

    /// Image counts per split, in train/valid/test order.
    pub fn image_counts(&self, records: &[ImageRecord]) -> [usize; 3] {
        let mut c = [0; 3];
        for r in records {
            match self.split_of(&r.subject_id) {
                Split::Train => c[0] += 1,
                Split::Valid => c[1] += 1,
                Split::Test => c[2] += 1,
                Split::Unassigned => {}
            }
        }
        c
    }

    pub fn subject_counts(&self) -> [usize; 3] {
        let mut c = [0; 3];
        for s in self.assignment.values() {
            if let Some(k) = Split::ASSIGNABLE.iter().position(|a| a == s) {
                c[k] += 1;
            }
        }
        c
    }
}

/// Shuffles subjects with a seeded generator, orders them by image count
/// (largest first, shuffle order among equals), then hands each to the split
/// whose image-count deficit against its target is largest. Ties go to
/// train, then valid, then test.
pub fn split_by_subject(records: &[ImageRecord], ratios: SplitRatios, seed: u64) -> Result<SplitPlan> {
    ratios.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyInput("split needs at least one image record"));
    }
    let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *per_subject.entry(r.subject_id.as_str()).or_default() += 1;
    }
    let mut subjects: Vec<(&str, usize)> = per_subject.into_iter().collect();
    subjects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    subjects.sort_by(|a, b| b.1.cmp(&a.1));

    let total = records.len() as f64;
    let targets = ratios.as_array().map(|r| r * total);
    let mut counts = [0usize; 3];
    let mut assignment = BTreeMap::new();
    for (subject, n) in subjects {
        let mut best = 0;
        let mut best_deficit = f64::NEG_INFINITY;
        for k in 0..3 {
            if ratios.as_array()[k] == 0.0 {
                continue;
            }
            let d = targets[k] - counts[k] as f64;
            if d > best_deficit {
                best = k;
                best_deficit = d;
            }
        }
        counts[best] += n;
        assignment.insert(subject.to_string(), Split::ASSIGNABLE[best]);
    }
    Ok(SplitPlan { assignment, ratios })
}
