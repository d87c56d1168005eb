//! YOLO text labels: `class cx cy w h` for boxes, `class x1 y1 x2 y2 …`
//! (three or more vertices) for polygons. All coordinates normalized.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{norm_to_abs, polygon_to_bbox, BBox, ClassId, NormBox, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub enum LabelShape {
    Box(NormBox),
    Polygon(Polygon),
}

impl LabelShape {
    pub fn class_id(&self) -> ClassId {
        match self {
            LabelShape::Box(b) => b.class_id,
            LabelShape::Polygon(p) => p.class_id,
        }
    }

    /// Absolute bounding box on a `width` × `height` image.
    pub fn to_abs_bbox(&self, width: u32, height: u32) -> BBox {
        match self {
            LabelShape::Box(b) => norm_to_abs(b, width, height),
            LabelShape::Polygon(p) => polygon_to_bbox(p, width, height).expect("validated polygon"),
        }
    }
}

pub fn parse_yolo_labels(text: &str, path: &Path) -> Result<Vec<LabelShape>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let malformed = |reason: String| Error::MalformedLabel {
            path: path.into(),
            line: n + 1,
            reason,
        };
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let class_id: ClassId = toks[0]
            .parse()
            .map_err(|_| malformed(format!("class `{}` is not a non-negative integer", toks[0])))?;
        let coords = toks[1..]
            .iter()
            .map(|t| {
                t.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| malformed(format!("`{t}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match coords.len() {
            4 => out.push(LabelShape::Box(NormBox {
                cx: coords[0],
                cy: coords[1],
                w: coords[2],
                h: coords[3],
                class_id,
            })),
            k if k >= 6 && k % 2 == 0 => {
                let verts = coords.chunks_exact(2).map(|c| (c[0], c[1])).collect();
                out.push(LabelShape::Polygon(Polygon::new(verts, class_id)?));
            }
            k => {
                return Err(malformed(format!(
                    "{k} coordinates (need 4 for a box or an even count >= 6 for a polygon)"
                )))
            }
        }
    }
    Ok(out)
}

pub fn read_yolo_labels(path: &Path) -> Result<Vec<LabelShape>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_yolo_labels(&text, path)
}

pub fn format_yolo_labels(shapes: &[LabelShape]) -> String {
    let mut s = String::new();
    for shape in shapes {
        match shape {
            LabelShape::Box(b) => {
                let _ = writeln!(s, "{} {:.6} {:.6} {:.6} {:.6}", b.class_id, b.cx, b.cy, b.w, b.h);
            }
            LabelShape::Polygon(p) => {
                let _ = write!(s, "{}", p.class_id);
                for (x, y) in &p.vertices {
                    let _ = write!(s, " {x:.6} {y:.6}");
                }
                s.push('\n');
            }
        }
    }
    s
}

pub fn write_yolo_labels(path: &Path, shapes: &[LabelShape]) -> Result<()> {
    fs::write(path, format_yolo_labels(shapes)).map_err(|e| Error::io(path, e))
}
