//! Seeded offline augmentation of the training split.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::labels::{read_yolo_labels, write_yolo_labels};
use super::layout::{split_dirs, DatasetEntry};
use super::transform::{apply_chain, Geometric, Photometric, Transform};
use crate::error::{Error, Result};
use crate::geometry::Split;

pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Which transforms may be sampled and how far. Percent fields are in
/// percent (25 means ±25 %).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentSpec {
    pub flip_horizontal: bool,
    pub flip_vertical: bool,
    /// Quarter turns: clockwise, counterclockwise or upside down.
    pub rot90: bool,
    pub rotation_deg: f64,
    pub shear_deg: f64,
    pub crop_zoom_max: f64,
    pub saturation_pct: f64,
    pub brightness_pct: f64,
    /// Upper bound of the Gaussian blur sigma, in pixels.
    pub blur_px_max: f64,
    pub noise_frac_max: f64,
    pub multiplier: u32,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            flip_horizontal: true,
            flip_vertical: true,
            rot90: true,
            rotation_deg: 15.0,
            shear_deg: 10.0,
            crop_zoom_max: 0.20,
            saturation_pct: 25.0,
            brightness_pct: 15.0,
            blur_px_max: 2.5,
            noise_frac_max: 0.001,
            multiplier: 10,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    /// Nothing enabled: every variant is a verbatim copy.
    pub fn disabled(multiplier: u32, seed: u64) -> Self {
        Self {
            flip_horizontal: false,
            flip_vertical: false,
            rot90: false,
            rotation_deg: 0.0,
            shear_deg: 0.0,
            crop_zoom_max: 0.0,
            saturation_pct: 0.0,
            brightness_pct: 0.0,
            blur_px_max: 0.0,
            noise_frac_max: 0.0,
            multiplier,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("rotation_deg", self.rotation_deg),
            ("shear_deg", self.shear_deg),
            ("crop_zoom_max", self.crop_zoom_max),
            ("saturation_pct", self.saturation_pct),
            ("brightness_pct", self.brightness_pct),
            ("blur_px_max", self.blur_px_max),
            ("noise_frac_max", self.noise_frac_max),
        ];
        for (name, v) in ranges {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} = {v} must be a non-negative number")));
            }
        }
        if self.multiplier < 1 {
            return Err(Error::InvalidInput("multiplier must be >= 1".into()));
        }
        if self.noise_frac_max > 1.0 {
            return Err(Error::InvalidInput("noise_frac_max must be <= 1".into()));
        }
        if self.crop_zoom_max >= 1.0 {
            return Err(Error::InvalidInput("crop_zoom_max must be < 1".into()));
        }
        if self.shear_deg >= 45.0 {
            return Err(Error::InvalidInput("shear_deg must be < 45".into()));
        }
        Ok(())
    }

    /// Uniform draws for every enabled transform, geometric first.
    pub fn sample_chain(&self, rng: &mut impl Rng) -> Vec<Transform> {
        let mut g = Vec::new();
        let sym = |rng: &mut dyn rand::RngCore, r: f64| rng.random_range(-r..=r);
        if self.flip_horizontal && rng.random_bool(0.5) {
            g.push(Geometric::FlipH);
        }
        if self.flip_vertical && rng.random_bool(0.5) {
            g.push(Geometric::FlipV);
        }
        if self.rot90 {
            match rng.random_range(0..4) {
                1 => g.push(Geometric::Rot90Cw),
                2 => g.push(Geometric::Rot90Ccw),
                3 => g.push(Geometric::Rot180),
                _ => {}
            }
        }
        if self.rotation_deg > 0.0 {
            g.push(Geometric::Rotate {
                deg: sym(rng, self.rotation_deg),
            });
        }
        if self.shear_deg > 0.0 {
            g.push(Geometric::Shear {
                x_deg: sym(rng, self.shear_deg),
                y_deg: sym(rng, self.shear_deg),
            });
        }
        if self.crop_zoom_max > 0.0 {
            g.push(Geometric::CropZoom {
                frac: rng.random_range(0.0..=self.crop_zoom_max),
                anchor_x: rng.random_range(0.0..=1.0),
                anchor_y: rng.random_range(0.0..=1.0),
            });
        }
        let mut chain: Vec<Transform> = g.into_iter().map(Transform::Geometric).collect();
        if self.saturation_pct > 0.0 {
            let p = sym(rng, self.saturation_pct) / 100.0;
            chain.push(Transform::Photometric(Photometric::Saturation { p }));
        }
        if self.brightness_pct > 0.0 {
            let p = sym(rng, self.brightness_pct) / 100.0;
            chain.push(Transform::Photometric(Photometric::Brightness { p }));
        }
        if self.blur_px_max > 0.0 {
            let sigma = rng.random_range(0.0..=self.blur_px_max);
            chain.push(Transform::Photometric(Photometric::Blur { sigma }));
        }
        if self.noise_frac_max > 0.0 {
            let frac = rng.random_range(0.0..=self.noise_frac_max);
            chain.push(Transform::Photometric(Photometric::SaltNoise { frac, seed: rng.random() }));
        }
        chain
    }
}

/// FNV-1a over the global seed, image id and variant index. Stable across
/// platforms and toolchains.
pub fn variant_seed(seed: u64, image_id: &str, variant: u32) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let bytes = seed
        .to_le_bytes()
        .into_iter()
        .chain(image_id.bytes())
        .chain([0xff])
        .chain(variant.to_le_bytes());
    for b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source_image: PathBuf,
    pub source_label: PathBuf,
    pub image_id: String,
    pub subject_id: String,
    pub variant: u32,
    pub seed: u64,
    pub chain: Vec<Transform>,
    /// Relative to the output root.
    pub image: PathBuf,
    /// Relative to the output root.
    pub label: PathBuf,
    pub instances_in: usize,
    pub instances_out: usize,
}

fn augment_one(e: &DatasetEntry, spec: &AugmentSpec, out_dir: &Path, variant: u32) -> Result<ManifestEntry> {
    let rec = &e.record;
    let seed = variant_seed(spec.seed, &rec.image_id, variant);
    let chain = spec.sample_chain(&mut ChaCha8Rng::seed_from_u64(seed));
    let (idir, ldir) = split_dirs(out_dir, Split::Train);
    let stem = format!("{}_aug{variant}", rec.image_id);
    let label_rel = PathBuf::from("train/labels").join(format!("{stem}.txt"));
    let label_out = ldir.join(format!("{stem}.txt"));

    let shapes = if e.label_path.exists() {
        read_yolo_labels(&e.label_path)?
    } else {
        Vec::new()
    };

    let (image_rel, instances_out) = if chain.is_empty() {
        let ext = rec.path.extension().map(|x| x.to_string_lossy().into_owned());
        let name = match ext {
            Some(x) => format!("{stem}.{x}"),
            None => stem.clone(),
        };
        fs::copy(&rec.path, idir.join(&name)).map_err(|err| Error::io(&rec.path, err))?;
        if e.label_path.exists() {
            fs::copy(&e.label_path, &label_out).map_err(|err| Error::io(&e.label_path, err))?;
        } else {
            fs::write(&label_out, "").map_err(|err| Error::io(&label_out, err))?;
        }
        (PathBuf::from("train/images").join(name), shapes.len())
    } else {
        let frame = Frame::load(&rec.path)?;
        let (img, out_shapes) = apply_chain(&frame, &shapes, &chain);
        let name = format!("{stem}.png");
        img.save_png(&idir.join(&name))?;
        write_yolo_labels(&label_out, &out_shapes)?;
        (PathBuf::from("train/images").join(name), out_shapes.len())
    };

    Ok(ManifestEntry {
        source_image: rec.path.clone(),
        source_label: e.label_path.clone(),
        image_id: rec.image_id.clone(),
        subject_id: rec.subject_id.clone(),
        variant,
        seed,
        chain,
        image: image_rel,
        label: label_rel,
        instances_in: shapes.len(),
        instances_out,
    })
}

/// Writes `multiplier` variants of every training entry under
/// `<out_dir>/train/{images,labels}` and a `manifest.jsonl` next to them.
/// Validation and test entries are skipped.
pub fn augment_dataset(entries: &[DatasetEntry], spec: &AugmentSpec, out_dir: &Path) -> Result<Vec<ManifestEntry>> {
    spec.validate()?;
    let (idir, ldir) = split_dirs(out_dir, Split::Train);
    for d in [&idir, &ldir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let train: Vec<&DatasetEntry> = entries.iter().filter(|e| e.record.split == Split::Train).collect();
    let skipped = entries.len() - train.len();
    if skipped > 0 {
        log::info!("augment: skipping {skipped} non-train images");
    }
    let jobs: Vec<(&DatasetEntry, u32)> = train
        .iter()
        .flat_map(|&e| (0..spec.multiplier).map(move |k| (e, k)))
        .collect();
    let mut manifest = jobs
        .par_iter()
        .map(|&(e, k)| augment_one(e, spec, out_dir, k))
        .collect::<Result<Vec<_>>>()?;
    manifest.sort_by(|a, b| (&a.image_id, a.variant).cmp(&(&b.image_id, b.variant)));

    let path = out_dir.join(MANIFEST_FILE);
    let mut w = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| Error::io(&path, e))?);
    for m in &manifest {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
