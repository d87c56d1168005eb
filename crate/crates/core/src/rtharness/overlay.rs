//! Detection overlay: box outlines, confidence labels and optional mask
//! tint drawn into an RGB copy of the frame.

use serde::{Deserialize, Serialize};

use crate::datakit::Frame;
use crate::geometry::{BBox, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlayStyle {
    pub color: [u8; 3],
    pub thickness: u32,
    /// Draw the score with two decimals above the box.
    pub label: bool,
    /// Integer glyph scale for labels.
    pub font_scale: u32,
    /// Opacity of the mask tint; 0 disables it.
    pub mask_alpha: f32,
}

impl Default for OverlayStyle {
    fn default() -> Self {
        Self {
            color: [0, 90, 255],
            thickness: 2,
            label: true,
            font_scale: 2,
            mask_alpha: 0.35,
        }
    }
}

const GLYPH_W: u32 = 5;
const GLYPH_H: u32 = 7;

/// 5x7 glyphs, one byte per row, high bit on the left (bit 4).
fn glyph(c: char) -> [u8; 7] {
    match c {
        '0' => [0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e],
        '1' => [0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e],
        '2' => [0x0e, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1f],
        '3' => [0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e],
        '4' => [0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02],
        '5' => [0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e],
        '6' => [0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e],
        '7' => [0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08],
        '8' => [0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e],
        '9' => [0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c],
        '.' => [0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c],
        '-' => [0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00],
        _ => [0x1f, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1f],
    }
}

/// Pixel columns `[i0, i1)` and rows `[j0, j1)` whose centers lie inside
/// `b`, unclipped.
fn pixel_span(b: &BBox) -> (i64, i64, i64, i64) {
    let f = |v: f64| (v - 0.5).ceil() as i64;
    (f(b.x1), f(b.x2), f(b.y1), f(b.y2))
}

/// Pixels of a box outline of the given thickness, in unclipped pixel
/// coordinates. Edges outside the frame are simply not drawn.
pub fn outline_contains(b: &BBox, thickness: u32, i: i64, j: i64) -> bool {
    let (i0, i1, j0, j1) = pixel_span(b);
    let t = thickness as i64;
    let inside = i >= i0 && i < i1 && j >= j0 && j < j1;
    inside && (i < i0 + t || i >= i1 - t || j < j0 + t || j >= j1 - t)
}

struct Canvas<'a> {
    f: &'a mut Frame,
}

impl Canvas<'_> {
    fn put(&mut self, i: i64, j: i64, c: [u8; 3]) {
        if i >= 0 && j >= 0 && (i as u32) < self.f.width() && (j as u32) < self.f.height() {
            self.f.pixel_mut(i as u32, j as u32).copy_from_slice(&c);
        }
    }

    fn fill(&mut self, i0: i64, i1: i64, j0: i64, j1: i64, c: [u8; 3]) {
        let (w, h) = (self.f.width() as i64, self.f.height() as i64);
        for j in j0.max(0)..j1.min(h) {
            for i in i0.max(0)..i1.min(w) {
                self.put(i, j, c);
            }
        }
    }
}

/// Size in pixels of a rendered label.
pub fn label_size(text: &str, scale: u32) -> (u32, u32) {
    let n = text.chars().count() as u32;
    let s = scale.max(1);
    ((n * (GLYPH_W + 1) + 1) * s, (GLYPH_H + 2) * s)
}

/// The region a box's label occupies: above the box when it fits, else
/// just inside its top edge. Unclipped pixel coordinates `(i0, i1, j0, j1)`.
pub fn label_rect(b: &BBox, text: &str, scale: u32) -> (i64, i64, i64, i64) {
    let (lw, lh) = label_size(text, scale);
    let (i0, _, j0, _) = pixel_span(b);
    let top = if j0 - lh as i64 >= 0 { j0 - lh as i64 } else { j0 };
    let left = i0.max(0);
    (left, left + lw as i64, top, top + lh as i64)
}

pub fn score_label(score: f64) -> String {
    format!("{score:.2}")
}

fn draw_text(c: &mut Canvas, text: &str, i0: i64, j0: i64, scale: u32, fg: [u8; 3]) {
    let s = scale.max(1) as i64;
    for (k, ch) in text.chars().enumerate() {
        let g = glyph(ch);
        let ox = i0 + s + k as i64 * (GLYPH_W as i64 + 1) * s;
        for (row, bits) in g.iter().enumerate() {
            for col in 0..GLYPH_W as i64 {
                if bits & (0x10 >> col) != 0 {
                    let (x, y) = (ox + col * s, j0 + s + row as i64 * s);
                    c.fill(x, x + s, y, y + s, fg);
                }
            }
        }
    }
}

/// Draws `dets` onto an RGB copy of `frame`. The input is never modified.
pub fn overlay(frame: &Frame, dets: &[Detection], style: &OverlayStyle) -> Frame {
    let mut out = frame.to_rgb();
    let mut c = Canvas { f: &mut out };
    if style.mask_alpha > 0.0 {
        let a = style.mask_alpha.clamp(0.0, 1.0);
        for d in dets {
            let Some(m) = &d.mask else { continue };
            if (m.width(), m.height()) != (c.f.width(), c.f.height()) {
                continue;
            }
            for (x, y) in m.set_pixel_centers() {
                let px = c.f.pixel_mut(x as u32, y as u32);
                for (v, &col) in px.iter_mut().zip(&style.color) {
                    *v = (*v as f32 * (1.0 - a) + col as f32 * a).round() as u8;
                }
            }
        }
    }
    for d in dets {
        let (i0, i1, j0, j1) = pixel_span(&d.bbox);
        let t = style.thickness as i64;
        if i1 <= i0 || j1 <= j0 || t == 0 {
            continue;
        }
        c.fill(i0, i1, j0, (j0 + t).min(j1), style.color);
        c.fill(i0, i1, (j1 - t).max(j0), j1, style.color);
        c.fill(i0, (i0 + t).min(i1), j0, j1, style.color);
        c.fill((i1 - t).max(i0), i1, j0, j1, style.color);
    }
    if style.label {
        for d in dets {
            let text = score_label(d.score);
            let (li0, li1, lj0, lj1) = label_rect(&d.bbox, &text, style.font_scale);
            c.fill(li0, li1, lj0, lj1, style.color);
            draw_text(&mut c, &text, li0, lj0, style.font_scale, [255, 255, 255]);
        }
    }
    out
}
