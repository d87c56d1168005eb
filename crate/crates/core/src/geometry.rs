//! Geometry and annotation primitives shared by every other module.
//!
//! Boxes are continuous pixel coordinates. A pixel `(i, j)` belongs to a
//! region iff its center `(i + 0.5, j + 0.5)` lies inside it, which keeps
//! box IoU and mask IoU consistent with each other.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassId = u32;

/// The single foreground class used throughout ("tumor").
pub const TUMOR_CLASS: ClassId = 0;

/// Axis-aligned box in absolute pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    /// Builds a box from two corners in any order.
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self {
            x1: x1.min(x2),
            y1: y1.min(y2),
            x2: x1.max(x2),
            y2: y1.max(y2),
        }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn translate(&self, dx: f64, dy: f64) -> BBox {
        BBox::new(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)
    }

    pub fn scale(&self, sx: f64, sy: f64) -> BBox {
        BBox::new(self.x1 * sx, self.y1 * sy, self.x2 * sx, self.y2 * sy)
    }

    pub fn clamp(&self, width: f64, height: f64) -> BBox {
        BBox::new(
            self.x1.clamp(0.0, width),
            self.y1.clamp(0.0, height),
            self.x2.clamp(0.0, width),
            self.y2.clamp(0.0, height),
        )
    }

    /// Half-open containment `[x1, x2) × [y1, y2)`, matching the pixel-center rule.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x < self.x2 && y >= self.y1 && y < self.y2
    }

    /// Smallest box enclosing all points; `None` for an empty iterator.
    pub fn hull<I: IntoIterator<Item = (f64, f64)>>(points: I) -> Option<BBox> {
        let mut it = points.into_iter();
        let (x0, y0) = it.next()?;
        let (mut x1, mut y1, mut x2, mut y2) = (x0, y0, x0, y0);
        for (x, y) in it {
            x1 = x1.min(x);
            y1 = y1.min(y);
            x2 = x2.max(x);
            y2 = y2.max(y);
        }
        Some(BBox { x1, y1, x2, y2 })
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x1, self.y1),
            (self.x2, self.y1),
            (self.x2, self.y2),
            (self.x1, self.y2),
        ]
    }
}

/// YOLO-format box: center and size normalized to image dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub class_id: ClassId,
}

const NORM_OVERSHOOT_WARN: f64 = 1e-6;

fn clamp_unit(v: f64, what: &str) -> f64 {
    if !(-NORM_OVERSHOOT_WARN..=1.0 + NORM_OVERSHOOT_WARN).contains(&v) {
        log::warn!("normalized {what} = {v} outside [0, 1]; clamping");
    }
    v.clamp(0.0, 1.0)
}

impl NormBox {
    /// Normalized → absolute, clamped to the image.
    pub fn to_abs(&self, width: u32, height: u32) -> BBox {
        norm_to_abs(self, width, height)
    }
}

pub fn norm_to_abs(nb: &NormBox, width: u32, height: u32) -> BBox {
    let (w, h) = (width as f64, height as f64);
    let cx = clamp_unit(nb.cx, "cx");
    let cy = clamp_unit(nb.cy, "cy");
    let bw = clamp_unit(nb.w, "w");
    let bh = clamp_unit(nb.h, "h");
    BBox::new((cx - bw / 2.0) * w, (cy - bh / 2.0) * h, (cx + bw / 2.0) * w, (cy + bh / 2.0) * h)
        .clamp(w, h)
}

pub fn abs_to_norm(b: &BBox, class_id: ClassId, width: u32, height: u32) -> NormBox {
    let (w, h) = (width as f64, height as f64);
    let b = b.clamp(w, h);
    NormBox {
        cx: (b.x1 + b.x2) / 2.0 / w,
        cy: (b.y1 + b.y2) / 2.0 / h,
        w: b.width() / w,
        h: b.height() / h,
        class_id,
    }
}

/// Instance outline with vertices normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<(f64, f64)>,
    pub class_id: ClassId,
}

impl Polygon {
    pub fn new(vertices: Vec<(f64, f64)>, class_id: ClassId) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::InvalidPolygon(vertices.len()));
        }
        let vertices = vertices
            .into_iter()
            .map(|(x, y)| (clamp_unit(x, "x"), clamp_unit(y, "y")))
            .collect();
        Ok(Self { vertices, class_id })
    }

    fn check(&self) -> Result<()> {
        if self.vertices.len() < 3 {
            Err(Error::InvalidPolygon(self.vertices.len()))
        } else {
            Ok(())
        }
    }

    pub fn scaled(&self, width: u32, height: u32) -> Vec<(f64, f64)> {
        self.vertices
            .iter()
            .map(|&(x, y)| (x * width as f64, y * height as f64))
            .collect()
    }
}

pub fn polygon_to_bbox(p: &Polygon, width: u32, height: u32) -> Result<BBox> {
    p.check()?;
    let hull = BBox::hull(p.scaled(width, height)).expect("non-empty");
    Ok(hull.clamp(width as f64, height as f64))
}

pub fn rasterize_polygon(p: &Polygon, width: u32, height: u32) -> Result<BitMask> {
    p.check()?;
    Ok(rasterize_abs_polygon(&p.scaled(width, height), width, height))
}

/// Even-odd scanline fill of a polygon in absolute pixel coordinates.
pub fn rasterize_abs_polygon(vertices: &[(f64, f64)], width: u32, height: u32) -> BitMask {
    let mut mask = BitMask::new(width, height);
    if vertices.len() < 3 {
        return mask;
    }
    let mut xs = Vec::new();
    for j in 0..height {
        let y = j as f64 + 0.5;
        xs.clear();
        for k in 0..vertices.len() {
            let (xa, ya) = vertices[k];
            let (xb, yb) = vertices[(k + 1) % vertices.len()];
            if (ya <= y) != (yb <= y) {
                xs.push(xa + (y - ya) * (xb - xa) / (yb - ya));
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            // pixel centers in [pair[0], pair[1])
            let start = (pair[0] - 0.5).ceil().max(0.0);
            let end = (pair[1] - 0.5).ceil().min(width as f64);
            let (start, end) = (start as i64, end as i64);
            for i in start..end {
                mask.set(i as u32, j, true);
            }
        }
    }
    mask
}

/// Row-major boolean pixel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BitMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::DimensionMismatch(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    /// Pixels whose centers fall inside `b`.
    pub fn from_box(b: &BBox, width: u32, height: u32) -> Self {
        let mut m = Self::new(width, height);
        let i0 = (b.x1 - 0.5).ceil().max(0.0) as u32;
        let i1 = ((b.x2 - 0.5).ceil().max(0.0) as u32).min(width);
        let j0 = (b.y1 - 0.5).ceil().max(0.0) as u32;
        let j1 = ((b.y2 - 0.5).ceil().max(0.0) as u32).min(height);
        for j in j0..j1 {
            for i in i0..i1 {
                m.set(i, j, true);
            }
        }
        m
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Tight box around set pixels (pixel `i` spans `[i, i + 1)`).
    pub fn bbox(&self) -> Option<BBox> {
        let mut hull: Option<(u32, u32, u32, u32)> = None;
        for j in 0..self.height {
            for i in 0..self.width {
                if self.get(i, j) {
                    hull = Some(match hull {
                        None => (i, j, i, j),
                        Some((a, b, c, d)) => (a.min(i), b.min(j), c.max(i), d.max(j)),
                    });
                }
            }
        }
        hull.map(|(a, b, c, d)| BBox::new(a as f64, b as f64, c as f64 + 1.0, d as f64 + 1.0))
    }

    /// Centers of set pixels.
    pub fn set_pixel_centers(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(k, _)| ((k % w) as f64 + 0.5, (k / w) as f64 + 0.5))
    }
}

/// A scored, classed prediction in source-image pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    pub class_id: ClassId,
    pub mask: Option<BitMask>,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, class_id: ClassId) -> Self {
        Self {
            bbox,
            score,
            class_id,
            mask: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub image_id: String,
    pub subject_id: String,
    pub bbox: BBox,
    pub mask: Option<BitMask>,
    pub class_id: ClassId,
}

impl GroundTruthInstance {
    pub fn new(image_id: impl Into<String>, subject_id: impl Into<String>, bbox: BBox) -> Self {
        Self {
            image_id: image_id.into(),
            subject_id: subject_id.into(),
            bbox,
            mask: None,
            class_id: TUMOR_CLASS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
    Unassigned,
}

impl Split {
    pub const ASSIGNABLE: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "val" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::InvalidInput(format!("unknown split `{s}`"))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub subject_id: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub split: Split,
}
