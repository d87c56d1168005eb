//! On-disk dataset layout: `<root>/{train,valid,test}/{images,labels}/`,
//! label basenames matching image basenames with a `.txt` extension.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::frame::image_dimensions;
use super::labels::{read_yolo_labels, LabelShape};
use super::split::SplitPlan;
use crate::error::{Error, Result};
use crate::geometry::{rasterize_polygon, BitMask, GroundTruthInstance, ImageRecord, Split};
use crate::metrics::ByImage;

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "PNG"];

/// An image record plus the label file that goes with it (which may not
/// exist: an image without a label file has no instances).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub record: ImageRecord,
    pub label_path: PathBuf,
}

/// Derives a subject id from an image stem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubjectRule {
    /// Text before the first occurrence of the delimiter (whole stem if absent).
    Prefix(char),
    /// Every image is its own subject.
    PerImage,
}

impl Default for SubjectRule {
    fn default() -> Self {
        SubjectRule::Prefix('_')
    }
}

impl SubjectRule {
    pub fn subject_of(&self, stem: &str) -> String {
        match self {
            SubjectRule::Prefix(c) => stem.split(*c).next().unwrap_or(stem).to_string(),
            SubjectRule::PerImage => stem.to_string(),
        }
    }
}

fn is_image(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn sorted_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && is_image(&p) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn entries_in(images: &Path, labels: &Path, rule: &SubjectRule, split: Split) -> Result<Vec<DatasetEntry>> {
    sorted_images(images)?
        .into_iter()
        .map(|p| {
            let s = stem(&p);
            let (width, height) = image_dimensions(&p)?;
            Ok(DatasetEntry {
                label_path: labels.join(format!("{s}.txt")),
                record: ImageRecord {
                    subject_id: rule.subject_of(&s),
                    image_id: s,
                    path: p,
                    width,
                    height,
                    split,
                },
            })
        })
        .collect()
}

/// Unsplit images in `images_dir`, labels looked up in `labels_dir`.
pub fn scan_flat(images_dir: &Path, labels_dir: &Path, rule: &SubjectRule) -> Result<Vec<DatasetEntry>> {
    entries_in(images_dir, labels_dir, rule, Split::Unassigned)
}

/// Every split present under `root`.
pub fn scan_layout(root: &Path, rule: &SubjectRule) -> Result<Vec<DatasetEntry>> {
    let mut out = Vec::new();
    for split in Split::ASSIGNABLE {
        let dir = root.join(split.as_str());
        if dir.join("images").is_dir() {
            out.extend(entries_in(&dir.join("images"), &dir.join("labels"), rule, split)?);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("no images found under <root>/{train,valid,test}/images"));
    }
    Ok(out)
}

pub fn split_dirs(root: &Path, split: Split) -> (PathBuf, PathBuf) {
    let d = root.join(split.as_str());
    (d.join("images"), d.join("labels"))
}

/// Copies every entry into `out_root` according to `plan`. Missing label
/// files become empty ones.
pub fn materialize_split(entries: &[DatasetEntry], plan: &SplitPlan, out_root: &Path) -> Result<Vec<DatasetEntry>> {
    for s in Split::ASSIGNABLE {
        let (i, l) = split_dirs(out_root, s);
        for d in [i, l] {
            fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
        }
    }
    entries
        .iter()
        .map(|e| {
            let split = plan.split_of(&e.record.subject_id);
            if split == Split::Unassigned {
                return Err(Error::InvalidInput(format!("subject `{}` missing from plan", e.record.subject_id)));
            }
            let (idir, ldir) = split_dirs(out_root, split);
            let name = e.record.path.file_name().expect("image file name");
            let img = idir.join(name);
            fs::copy(&e.record.path, &img).map_err(|err| Error::io(&e.record.path, err))?;
            let lab = ldir.join(format!("{}.txt", e.record.image_id));
            if e.label_path.exists() {
                fs::copy(&e.label_path, &lab).map_err(|err| Error::io(&e.label_path, err))?;
            } else {
                fs::write(&lab, "").map_err(|err| Error::io(&lab, err))?;
            }
            Ok(DatasetEntry {
                record: ImageRecord {
                    path: img,
                    split,
                    ..e.record.clone()
                },
                label_path: lab,
            })
        })
        .collect()
}

/// Ground truth of every entry in absolute pixels, keyed by image id.
/// Images without a label file appear with no instances. With `masks`,
/// polygons are rasterized and boxes become filled rectangles.
pub fn load_ground_truth(entries: &[DatasetEntry], masks: bool) -> Result<ByImage<GroundTruthInstance>> {
    let mut out = ByImage::new();
    for e in entries {
        let r = &e.record;
        let shapes = if e.label_path.exists() {
            read_yolo_labels(&e.label_path)?
        } else {
            Vec::new()
        };
        let gts = out.entry(r.image_id.clone()).or_insert_with(Vec::new);
        for s in shapes {
            let bbox = s.to_abs_bbox(r.width, r.height);
            let mut g = GroundTruthInstance::new(&r.image_id, &r.subject_id, bbox);
            g.class_id = s.class_id();
            if masks {
                g.mask = Some(match &s {
                    LabelShape::Polygon(p) => rasterize_polygon(p, r.width, r.height)?,
                    LabelShape::Box(_) => BitMask::from_box(&bbox, r.width, r.height),
                });
            }
            gts.push(g);
        }
    }
    Ok(out)
}
