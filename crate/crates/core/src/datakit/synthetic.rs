//! Procedural ultrasound-like frames with one elliptical lesion each, for
//! demos, tests and benchmarks.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frame::Frame;
use super::labels::{write_yolo_labels, LabelShape};
use crate::error::{Error, Result};
use crate::geometry::{Polygon, TUMOR_CLASS};

/// Lesion outline in normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lesion {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Lesion {
    pub fn random(rng: &mut impl Rng) -> Self {
        Self {
            cx: rng.random_range(0.25..0.75),
            cy: rng.random_range(0.3..0.7),
            rx: rng.random_range(0.04..0.2),
            ry: rng.random_range(0.03..0.15),
        }
    }

    pub fn polygon(&self, vertices: usize) -> Polygon {
        let v = (0..vertices)
            .map(|k| {
                let t = k as f64 / vertices as f64 * std::f64::consts::TAU;
                (self.cx + self.rx * t.cos(), self.cy + self.ry * t.sin())
            })
            .collect();
        Polygon::new(v, TUMOR_CLASS).expect(">= 3 vertices")
    }
}

/// Speckled gray background with a dark lesion. Deterministic in `seed`.
pub fn synthetic_frame(width: u32, height: u32, lesion: &Lesion, seed: u64) -> Frame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(width as usize * height as usize);
    for j in 0..height {
        let depth = j as f64 / height.max(1) as f64;
        for i in 0..width {
            let x = (i as f64 + 0.5) / width as f64;
            let y = (j as f64 + 0.5) / height as f64;
            let r = ((x - lesion.cx) / lesion.rx).powi(2) + ((y - lesion.cy) / lesion.ry).powi(2);
            let base = if r <= 1.0 { 35.0 } else { 140.0 - 60.0 * depth };
            let speckle: f64 = rng.random_range(-25.0..25.0);
            data.push((base + speckle).clamp(0.0, 255.0) as u8);
        }
    }
    Frame::new(width, height, 1, data).expect("sized")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub subjects: usize,
    /// Inclusive range of images per subject.
    pub images_per_subject: (usize, usize),
    pub width: u32,
    pub height: u32,
    pub seed: u64,
}

/// Writes `<root>/images/<subject>_<k>.png` and matching polygon labels.
/// Returns the number of images written.
pub fn write_synthetic_dataset(root: &Path, spec: &SyntheticDataset) -> Result<usize> {
    let (img_dir, lab_dir) = (root.join("images"), root.join("labels"));
    for d in [&img_dir, &lab_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.images_per_subject;
    let mut n = 0;
    for s in 0..spec.subjects {
        let count = rng.random_range(lo.min(hi)..=hi.max(lo));
        for k in 0..count {
            let lesion = Lesion::random(&mut rng);
            let stem = format!("s{s:03}_{k:03}");
            synthetic_frame(spec.width, spec.height, &lesion, rng.random())
                .save_png(&img_dir.join(format!("{stem}.png")))?;
            write_yolo_labels(&lab_dir.join(format!("{stem}.txt")), &[LabelShape::Polygon(lesion.polygon(16))])?;
            n += 1;
        }
    }
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_deterministic_and_lesion_is_dark() {
        let l = Lesion { cx: 0.5, cy: 0.5, rx: 0.2, ry: 0.2 };
        let f = synthetic_frame(40, 40, &l, 1);
        assert_eq!(f, synthetic_frame(40, 40, &l, 1));
        assert!(f.pixel(20, 20)[0] < 70);
        assert!(f.pixel(2, 2)[0] > 90);
    }
}
