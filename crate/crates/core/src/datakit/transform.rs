//! Geometric and photometric image transforms that keep labels in sync.
//!
//! Geometric transforms are affine maps in absolute pixel coordinates where
//! pixel `(i, j)` covers `[i, i+1) × [j, j+1)`. Images are resampled by
//! inverse mapping output pixel centers: flips and quarter turns land exactly
//! on source centers, everything else is sampled bilinearly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::Frame;
use super::labels::LabelShape;
use crate::geometry::{abs_to_norm, BBox, BitMask, Polygon};

/// `x' = m[0]·x + m[1]·y + m[2]`, `y' = m[3]·x + m[4]·y + m[5]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub m: [f64; 6],
}

impl Affine {
    pub const IDENTITY: Affine = Affine {
        m: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    };

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        (m[0] * x + m[1] * y + m[2], m[3] * x + m[4] * y + m[5])
    }

    /// `next ∘ self`.
    pub fn then(&self, next: &Affine) -> Affine {
        let (a, b) = (&self.m, &next.m);
        Affine {
            m: [
                b[0] * a[0] + b[1] * a[3],
                b[0] * a[1] + b[1] * a[4],
                b[0] * a[2] + b[1] * a[5] + b[2],
                b[3] * a[0] + b[4] * a[3],
                b[3] * a[1] + b[4] * a[4],
                b[3] * a[2] + b[4] * a[5] + b[5],
            ],
        }
    }

    pub fn inverse(&self) -> Option<Affine> {
        let m = &self.m;
        let det = m[0] * m[4] - m[1] * m[3];
        if det.abs() < 1e-12 {
            return None;
        }
        let (a, b, d, e) = (m[4] / det, -m[1] / det, -m[3] / det, m[0] / det);
        Some(Affine {
            m: [a, b, -(a * m[2] + b * m[5]), d, e, -(d * m[2] + e * m[5])],
        })
    }

    fn about_center(lin: [f64; 4], cx: f64, cy: f64) -> Affine {
        let [a, b, d, e] = lin;
        Affine {
            m: [a, b, cx - a * cx - b * cy, d, e, cy - d * cx - e * cy],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Geometric {
    FlipH,
    FlipV,
    Rot90Cw,
    Rot90Ccw,
    Rot180,
    /// Clockwise on screen, about the image center.
    Rotate { deg: f64 },
    /// `x' = x + tan(x_deg)·(y − cy)`, `y' = y + tan(y_deg)·(x − cx)`.
    Shear { x_deg: f64, y_deg: f64 },
    /// Crops a `(1 − frac)` window placed at `anchor` (0 = left/top, 1 =
    /// right/bottom) and stretches it back to full size.
    CropZoom { frac: f64, anchor_x: f64, anchor_y: f64 },
}

impl Geometric {
    /// Forward map and output size for a `w` × `h` input.
    pub fn affine(&self, w: u32, h: u32) -> (Affine, u32, u32) {
        let (fw, fh) = (w as f64, h as f64);
        let (cx, cy) = (fw / 2.0, fh / 2.0);
        let m = |m| Affine { m };
        match *self {
            Geometric::FlipH => (m([-1.0, 0.0, fw, 0.0, 1.0, 0.0]), w, h),
            Geometric::FlipV => (m([1.0, 0.0, 0.0, 0.0, -1.0, fh]), w, h),
            Geometric::Rot180 => (m([-1.0, 0.0, fw, 0.0, -1.0, fh]), w, h),
            Geometric::Rot90Cw => (m([0.0, -1.0, fh, 1.0, 0.0, 0.0]), h, w),
            Geometric::Rot90Ccw => (m([0.0, 1.0, 0.0, -1.0, 0.0, fw]), h, w),
            Geometric::Rotate { deg } => {
                let (s, c) = deg.to_radians().sin_cos();
                (Affine::about_center([c, -s, s, c], cx, cy), w, h)
            }
            Geometric::Shear { x_deg, y_deg } => {
                let (tx, ty) = (x_deg.to_radians().tan(), y_deg.to_radians().tan());
                (Affine::about_center([1.0, tx, ty, 1.0], cx, cy), w, h)
            }
            Geometric::CropZoom {
                frac,
                anchor_x,
                anchor_y,
            } => {
                let keep = (1.0 - frac).clamp(1e-3, 1.0);
                let (ww, wh) = (fw * keep, fh * keep);
                let ox = anchor_x.clamp(0.0, 1.0) * (fw - ww);
                let oy = anchor_y.clamp(0.0, 1.0) * (fh - wh);
                (m([1.0 / keep, 0.0, -ox / keep, 0.0, 1.0 / keep, -oy / keep]), w, h)
            }
        }
    }

    /// True when pixels map one-to-one without interpolation.
    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            Geometric::FlipH | Geometric::FlipV | Geometric::Rot90Cw | Geometric::Rot90Ccw | Geometric::Rot180
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Photometric {
    /// Blend toward luma by `1 + p`; gray frames are left unchanged.
    Saturation { p: f64 },
    /// Multiply values by `1 + p`, rounding and clamping to 0..=255.
    Brightness { p: f64 },
    /// Separable Gaussian with standard deviation `sigma` pixels.
    Blur { sigma: f64 },
    /// Sets `floor(frac·W·H)` distinct pixels to 0 or 255.
    SaltNoise { frac: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Transform {
    Geometric(Geometric),
    Photometric(Photometric),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Value of the source pixel containing the mapped point.
    Nearest,
    Bilinear,
}

/// Resamples `frame` under the forward map `fwd`. Points mapping outside
/// the source extent are black.
pub fn warp_frame(frame: &Frame, fwd: &Affine, out_w: u32, out_h: u32, sampling: Sampling) -> Frame {
    if *fwd == Affine::IDENTITY && (frame.width(), frame.height()) == (out_w, out_h) {
        return frame.clone();
    }
    let inv = fwd.inverse().expect("invertible transform");
    let (w, h, ch) = (frame.width() as i64, frame.height() as i64, frame.channels() as usize);
    let (fw, fh) = (w as f64, h as f64);
    let src = frame.data();
    let mut out = vec![0u8; out_w as usize * out_h as usize * ch];
    let px = |x: i64, y: i64| ((y * w + x) as usize) * ch;
    for j in 0..out_h {
        for i in 0..out_w {
            let (sx, sy) = inv.apply(i as f64 + 0.5, j as f64 + 0.5);
            if !(sx >= 0.0 && sy >= 0.0 && sx < fw && sy < fh) {
                continue;
            }
            let o = (j as usize * out_w as usize + i as usize) * ch;
            match sampling {
                Sampling::Nearest => {
                    let s = px(sx as i64, sy as i64);
                    out[o..o + ch].copy_from_slice(&src[s..s + ch]);
                }
                Sampling::Bilinear => {
                    let (u, v) = (sx - 0.5, sy - 0.5);
                    let (x0, y0) = (u.floor(), v.floor());
                    let (ax, ay) = (u - x0, v - y0);
                    let (x0, y0) = (x0 as i64, y0 as i64);
                    let cx = |x: i64| x.clamp(0, w - 1);
                    let cy = |y: i64| y.clamp(0, h - 1);
                    let p00 = px(cx(x0), cy(y0));
                    let p10 = px(cx(x0 + 1), cy(y0));
                    let p01 = px(cx(x0), cy(y0 + 1));
                    let p11 = px(cx(x0 + 1), cy(y0 + 1));
                    for c in 0..ch {
                        let top = src[p00 + c] as f64 * (1.0 - ax) + src[p10 + c] as f64 * ax;
                        let bot = src[p01 + c] as f64 * (1.0 - ax) + src[p11 + c] as f64 * ax;
                        out[o + c] = (top * (1.0 - ay) + bot * ay).round().clamp(0.0, 255.0) as u8;
                    }
                }
            }
        }
    }
    Frame::new(out_w, out_h, frame.channels(), out).expect("sized")
}

/// Moves a mask with the same pixel-containment rule the image uses.
pub fn warp_mask(mask: &BitMask, fwd: &Affine, out_w: u32, out_h: u32) -> BitMask {
    let inv = fwd.inverse().expect("invertible transform");
    let (fw, fh) = (mask.width() as f64, mask.height() as f64);
    let mut out = BitMask::new(out_w, out_h);
    for j in 0..out_h {
        for i in 0..out_w {
            let (sx, sy) = inv.apply(i as f64 + 0.5, j as f64 + 0.5);
            if sx >= 0.0 && sy >= 0.0 && sx < fw && sy < fh && mask.get(sx as u32, sy as u32) {
                out.set(i, j, true);
            }
        }
    }
    out
}

pub fn transform_mask(mask: &BitMask, t: Geometric) -> BitMask {
    let (a, w, h) = t.affine(mask.width(), mask.height());
    warp_mask(mask, &a, w, h)
}

/// Hull of the transformed corners, clamped to the output frame.
pub fn transform_box(b: &BBox, fwd: &Affine, out_w: u32, out_h: u32) -> BBox {
    BBox::hull(b.corners().map(|(x, y)| fwd.apply(x, y)))
        .expect("four corners")
        .clamp(out_w as f64, out_h as f64)
}

/// Sutherland–Hodgman clip against `[0, w] × [0, h]`.
fn clip_to_frame(poly: Vec<(f64, f64)>, w: f64, h: f64) -> Vec<(f64, f64)> {
    type Edge = (fn((f64, f64), f64) -> f64, f64);
    let edges: [Edge; 4] = [
        (|p, _| p.0, 0.0),
        (|p, l| l - p.0, w),
        (|p, _| p.1, 0.0),
        (|p, l| l - p.1, h),
    ];
    let mut cur = poly;
    for (dist, lim) in edges {
        if cur.is_empty() {
            break;
        }
        let mut next = Vec::with_capacity(cur.len() + 2);
        for k in 0..cur.len() {
            let a = cur[k];
            let b = cur[(k + 1) % cur.len()];
            let (da, db) = (dist(a, lim), dist(b, lim));
            if da >= 0.0 {
                next.push(a);
            }
            if (da >= 0.0) != (db >= 0.0) {
                let t = da / (da - db);
                next.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
            }
        }
        cur = next;
    }
    cur
}

fn shoelace(v: &[(f64, f64)]) -> f64 {
    let n = v.len();
    (0..n)
        .map(|k| {
            let (a, b) = (v[k], v[(k + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Minimum clamped area (px²) for an instance to survive a transform.
pub const MIN_INSTANCE_AREA: f64 = 1.0;
const AREA_SLACK: f64 = 1e-9;

fn map_shapes(shapes: &[LabelShape], w: u32, h: u32, fwd: &Affine, ow: u32, oh: u32) -> Vec<LabelShape> {
    if *fwd == Affine::IDENTITY && (w, h) == (ow, oh) {
        return shapes.to_vec();
    }
    let (fow, foh) = (ow as f64, oh as f64);
    shapes
        .iter()
        .filter_map(|s| match s {
            LabelShape::Box(nb) => {
                let b = transform_box(&nb.to_abs(w, h), fwd, ow, oh);
                (b.area() >= MIN_INSTANCE_AREA - AREA_SLACK).then(|| LabelShape::Box(abs_to_norm(&b, nb.class_id, ow, oh)))
            }
            LabelShape::Polygon(p) => {
                let moved = p.scaled(w, h).into_iter().map(|(x, y)| fwd.apply(x, y)).collect();
                let clipped = clip_to_frame(moved, fow, foh);
                if clipped.len() < 3 || shoelace(&clipped) <= 0.0 {
                    return None;
                }
                let hull = BBox::hull(clipped.iter().copied())?;
                if hull.area() < MIN_INSTANCE_AREA - AREA_SLACK {
                    return None;
                }
                let verts = clipped
                    .into_iter()
                    .map(|(x, y)| ((x / fow).clamp(0.0, 1.0), (y / foh).clamp(0.0, 1.0)))
                    .collect();
                Polygon::new(verts, p.class_id).ok().map(LabelShape::Polygon)
            }
        })
        .collect()
}

pub fn transform_geometric(frame: &Frame, shapes: &[LabelShape], t: Geometric) -> (Frame, Vec<LabelShape>) {
    let (w, h) = (frame.width(), frame.height());
    let (a, ow, oh) = t.affine(w, h);
    let sampling = if t.is_exact() {
        Sampling::Nearest
    } else {
        Sampling::Bilinear
    };
    (warp_frame(frame, &a, ow, oh, sampling), map_shapes(shapes, w, h, &a, ow, oh))
}

fn luma(p: &[u8]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn gaussian_blur(frame: &mut Frame, sigma: f64) {
    if !(sigma > 0.0) {
        return;
    }
    let r = (3.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);

    let (w, h, ch) = (frame.width() as i64, frame.height() as i64, frame.channels() as usize);
    let src = frame.data();
    let mut tmp = vec![0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (t, kv) in k.iter().enumerate() {
                    let xx = (x + t as i64 - r).clamp(0, w - 1);
                    acc += kv * src[((y * w + xx) as usize) * ch + c] as f64;
                }
                tmp[((y * w + x) as usize) * ch + c] = acc;
            }
        }
    }
    let dst = frame.data_mut();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = 0.0;
                for (t, kv) in k.iter().enumerate() {
                    let yy = (y + t as i64 - r).clamp(0, h - 1);
                    acc += kv * tmp[((yy * w + x) as usize) * ch + c];
                }
                dst[((y * w + x) as usize) * ch + c] = to_u8(acc);
            }
        }
    }
}

pub fn transform_photometric(frame: &Frame, t: Photometric) -> Frame {
    let mut out = frame.clone();
    match t {
        Photometric::Brightness { p } => {
            if p != 0.0 {
                out.data_mut().iter_mut().for_each(|v| *v = to_u8(*v as f64 * (1.0 + p)));
            }
        }
        Photometric::Saturation { p } => {
            if frame.channels() == 3 && p != 0.0 {
                for px in out.data_mut().chunks_exact_mut(3) {
                    let l = luma(px);
                    px.iter_mut().for_each(|v| *v = to_u8(l + (*v as f64 - l) * (1.0 + p)));
                }
            }
        }
        Photometric::Blur { sigma } => gaussian_blur(&mut out, sigma),
        Photometric::SaltNoise { frac, seed } => {
            let n = frame.width() as usize * frame.height() as usize;
            let count = ((frac.clamp(0.0, 1.0) * n as f64).floor() as usize).min(n);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ch = frame.channels() as usize;
            let data = out.data_mut();
            for idx in rand::seq::index::sample(&mut rng, n, count) {
                let v = if rng.random_bool(0.5) { 255 } else { 0 };
                data[idx * ch..(idx + 1) * ch].fill(v);
            }
        }
    }
    out
}

/// Applies a chain in order. Runs of consecutive geometric transforms are
/// composed and resampled once.
pub fn apply_chain(frame: &Frame, shapes: &[LabelShape], chain: &[Transform]) -> (Frame, Vec<LabelShape>) {
    let mut frame = frame.clone();
    let mut shapes = shapes.to_vec();
    let mut k = 0;
    while k < chain.len() {
        match chain[k] {
            Transform::Photometric(p) => {
                frame = transform_photometric(&frame, p);
                k += 1;
            }
            Transform::Geometric(_) => {
                let (w, h) = (frame.width(), frame.height());
                let (mut acc, mut ow, mut oh, mut exact) = (Affine::IDENTITY, w, h, true);
                while let Some(Transform::Geometric(g)) = chain.get(k) {
                    let (a, nw, nh) = g.affine(ow, oh);
                    acc = acc.then(&a);
                    (ow, oh) = (nw, nh);
                    exact &= g.is_exact();
                    k += 1;
                }
                let sampling = if exact {
                    Sampling::Nearest
                } else {
                    Sampling::Bilinear
                };
                shapes = map_shapes(&shapes, w, h, &acc, ow, oh);
                frame = warp_frame(&frame, &acc, ow, oh, sampling);
            }
        }
    }
    (frame, shapes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{norm_to_abs, rasterize_abs_polygon};
    use proptest::prelude::*;

    fn ramp_frame(w: u32, h: u32, ch: u8) -> Frame {
        let data = (0..w * h * ch as u32).map(|i| (i * 31 % 251) as u8).collect();
        Frame::new(w, h, ch, data).unwrap()
    }

    fn abs_box(b: BBox, w: u32, h: u32) -> LabelShape {
        LabelShape::Box(abs_to_norm(&b, 0, w, h))
    }

    fn close_box(a: &BBox, b: &BBox, tol: f64) -> bool {
        (a.x1 - b.x1).abs() <= tol && (a.y1 - b.y1).abs() <= tol && (a.x2 - b.x2).abs() <= tol && (a.y2 - b.y2).abs() <= tol
    }

    #[test]
    fn flip_h_box() {
        let f = Frame::filled(100, 100, 1, 0);
        let (_, s) = transform_geometric(&f, &[abs_box(BBox::new(10.0, 10.0, 30.0, 40.0), 100, 100)], Geometric::FlipH);
        assert!(close_box(&s[0].to_abs_bbox(100, 100), &BBox::new(70.0, 10.0, 90.0, 40.0), 1e-9));
    }

    #[test]
    fn quarter_turns_are_inverse() {
        let f = ramp_frame(7, 4, 3);
        let shapes = vec![abs_box(BBox::new(1.0, 0.5, 5.0, 3.0), 7, 4)];
        let (g, s) = transform_geometric(&f, &shapes, Geometric::Rot90Cw);
        assert_eq!((g.width(), g.height()), (4, 7));
        let (back, s2) = transform_geometric(&g, &s, Geometric::Rot90Ccw);
        assert_eq!(back, f);
        assert!(close_box(&s2[0].to_abs_bbox(7, 4), &shapes[0].to_abs_bbox(7, 4), 1e-9));
        // (x, y) -> (H - y, x): pixel (0, 0) lands at column H - 1
        assert_eq!(g.pixel(3, 0), f.pixel(0, 0));
    }

    #[test]
    fn rot180_twice_and_flips_twice_are_identity() {
        let f = ramp_frame(5, 6, 1);
        for t in [Geometric::Rot180, Geometric::FlipH, Geometric::FlipV] {
            let (g, _) = transform_geometric(&f, &[], t);
            assert_ne!(g, f);
            assert_eq!(transform_geometric(&g, &[], t).0, f);
        }
    }

    #[test]
    fn rotate_zero_is_identity() {
        let f = ramp_frame(9, 5, 3);
        let shapes = vec![
            abs_box(BBox::new(1.0, 1.0, 4.0, 3.0), 9, 5),
            LabelShape::Polygon(Polygon::new(vec![(0.1, 0.1), (0.5, 0.9), (0.9, 0.2)], 0).unwrap()),
        ];
        for t in [
            Geometric::Rotate { deg: 0.0 },
            Geometric::Shear { x_deg: 0.0, y_deg: 0.0 },
            Geometric::CropZoom { frac: 0.0, anchor_x: 0.3, anchor_y: 0.9 },
        ] {
            let (g, s) = transform_geometric(&f, &shapes, t);
            assert_eq!(g, f, "{t:?}");
            assert_eq!(s, shapes, "{t:?}");
        }
    }

    #[test]
    fn crop_zoom_maps_window_to_frame() {
        let (a, _, _) = Geometric::CropZoom { frac: 0.2, anchor_x: 1.0, anchor_y: 0.0 }.affine(100, 50);
        let (x, y) = a.apply(20.0, 0.0);
        assert!((x - 0.0).abs() < 1e-9 && y.abs() < 1e-9);
        let (x, y) = a.apply(100.0, 40.0);
        assert!((x - 100.0).abs() < 1e-9 && (y - 50.0).abs() < 1e-9);
    }

    #[test]
    fn boxes_leaving_the_frame_are_dropped() {
        let f = Frame::filled(100, 100, 1, 0);
        let corner = abs_box(BBox::new(0.0, 0.0, 2.0, 2.0), 100, 100);
        let t = Geometric::CropZoom { frac: 0.2, anchor_x: 1.0, anchor_y: 1.0 };
        assert!(transform_geometric(&f, &[corner], t).1.is_empty());
    }

    #[test]
    fn brightness_and_saturation() {
        let f = Frame::filled(3, 2, 1, 200);
        assert_eq!(transform_photometric(&f, Photometric::Brightness { p: 0.0 }), f);
        assert!(transform_photometric(&f, Photometric::Brightness { p: 0.15 }).data().iter().all(|&v| v == 230));
        assert!(transform_photometric(&f, Photometric::Brightness { p: 0.5 }).data().iter().all(|&v| v == 255));
        assert_eq!(transform_photometric(&f, Photometric::Saturation { p: 0.25 }), f);

        let c = Frame::new(1, 1, 3, vec![200, 100, 50]).unwrap();
        let gray = transform_photometric(&c, Photometric::Saturation { p: -1.0 });
        let l = to_u8(luma(c.data()));
        assert_eq!(gray.data(), &[l, l, l]);
        let more = transform_photometric(&c, Photometric::Saturation { p: 0.25 });
        assert!(more.data()[0] > 200 && more.data()[2] < 50);
    }

    #[test]
    fn salt_noise_budget() {
        let f = Frame::filled(640, 640, 1, 128);
        let g = transform_photometric(&f, Photometric::SaltNoise { frac: 0.001, seed: 3 });
        let changed = f.data().iter().zip(g.data()).filter(|(a, b)| a != b).count();
        assert!(changed <= 410 && changed > 0, "{changed}");
        assert!(g.data().iter().all(|&v| v == 0 || v == 128 || v == 255));
        assert_eq!(g, transform_photometric(&f, Photometric::SaltNoise { frac: 0.001, seed: 3 }));
    }

    #[test]
    fn blur_matches_direct_convolution() {
        let mut f = Frame::filled(9, 1, 1, 0);
        f.data_mut()[4] = 255;
        let g = transform_photometric(&f, Photometric::Blur { sigma: 1.0 });
        let w: Vec<f64> = (-3i32..=3).map(|x| (-(x * x) as f64 / 2.0).exp()).collect();
        let s: f64 = w.iter().sum();
        for (k, wk) in w.iter().enumerate() {
            assert_eq!(g.data()[k + 1], to_u8(255.0 * wk / s));
        }
        let flat = Frame::filled(6, 6, 3, 77);
        assert_eq!(transform_photometric(&flat, Photometric::Blur { sigma: 2.5 }), flat);
    }

    #[test]
    fn composed_chain_matches_single_steps_for_exact_ops() {
        let f = ramp_frame(6, 4, 1);
        let shapes = vec![abs_box(BBox::new(1.0, 1.0, 3.0, 2.0), 6, 4)];
        let chain = [Geometric::FlipH, Geometric::Rot90Cw, Geometric::FlipV];
        let (mut g, mut s) = (f.clone(), shapes.clone());
        for t in chain {
            (g, s) = transform_geometric(&g, &s, t);
        }
        let tchain: Vec<Transform> = chain.iter().map(|&t| Transform::Geometric(t)).collect();
        let (h, s2) = apply_chain(&f, &shapes, &tchain);
        assert_eq!(g, h);
        assert!(close_box(&s[0].to_abs_bbox(4, 6), &s2[0].to_abs_bbox(4, 6), 1e-9));
    }

    #[test]
    fn serde_tags() {
        let t = Transform::Geometric(Geometric::Rotate { deg: 3.5 });
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(s, r#"{"op":"rotate","deg":3.5}"#);
        assert_eq!(serde_json::from_str::<Transform>(&s).unwrap(), t);
        let p = Transform::Photometric(Photometric::SaltNoise { frac: 0.001, seed: 9 });
        assert_eq!(serde_json::from_str::<Transform>(&serde_json::to_string(&p).unwrap()).unwrap(), p);
    }

    fn geometric() -> impl Strategy<Value = Geometric> {
        prop_oneof![
            Just(Geometric::FlipH),
            Just(Geometric::FlipV),
            Just(Geometric::Rot90Cw),
            Just(Geometric::Rot90Ccw),
            Just(Geometric::Rot180),
            (-15.0..15.0f64).prop_map(|deg| Geometric::Rotate { deg }),
            (-10.0..10.0f64, -10.0..10.0f64).prop_map(|(x_deg, y_deg)| Geometric::Shear { x_deg, y_deg }),
            (0.0..0.2f64, 0.0..1.0f64, 0.0..1.0f64)
                .prop_map(|(frac, anchor_x, anchor_y)| Geometric::CropZoom { frac, anchor_x, anchor_y }),
        ]
    }

    proptest! {
        #[test]
        fn mask_and_label_stay_consistent(
            t in geometric(),
            w in 8u32..48, h in 8u32..48,
            verts in prop::collection::vec((0.05..0.95f64, 0.05..0.95f64), 3..7),
        ) {
            let poly = Polygon::new(verts, 0).unwrap();
            let mask = rasterize_abs_polygon(&poly.scaled(w, h), w, h);
            let Some(mb) = mask.bbox() else { return Ok(()) };
            let (a, ow, oh) = t.affine(w, h);
            let moved = warp_mask(&mask, &a, ow, oh);
            let tb = transform_box(&mb, &a, ow, oh);
            if t.is_exact() {
                prop_assert_eq!(moved.bbox(), Some(tb));
            } else {
                for (x, y) in moved.set_pixel_centers() {
                    prop_assert!(
                        x >= tb.x1 - 1e-9 && x <= tb.x2 + 1e-9 && y >= tb.y1 - 1e-9 && y <= tb.y2 + 1e-9,
                        "({x}, {y}) outside {tb:?}"
                    );
                }
            }

            let poly_survives = BBox::hull(poly.scaled(w, h)).unwrap().area() >= MIN_INSTANCE_AREA;
            let f = Frame::filled(w, h, 1, 50);
            let shapes = vec![LabelShape::Box(abs_to_norm(&mb, 0, w, h)), LabelShape::Polygon(poly)];
            let (_, out) = transform_geometric(&f, &shapes, t);
            for s in &out {
                let b = s.to_abs_bbox(ow, oh);
                prop_assert!(b.area() >= MIN_INSTANCE_AREA - 1e-9);
                match s {
                    LabelShape::Box(nb) => {
                        for v in [nb.cx, nb.cy, nb.w, nb.h] {
                            prop_assert!((0.0..=1.0).contains(&v));
                        }
                        prop_assert!(b.x1 >= -1e-9 && b.x2 <= ow as f64 + 1e-9);
                    }
                    LabelShape::Polygon(p) => {
                        prop_assert!(p.vertices.iter().all(|&(x, y)| (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)));
                    }
                }
            }
            if t.is_exact() {
                prop_assert_eq!(out.len(), 1 + poly_survives as usize);
                let b = norm_to_abs(&match &out[0] { LabelShape::Box(nb) => *nb, _ => unreachable!() }, ow, oh);
                prop_assert!(close_box(&b, &tb, 1e-9));
            }
        }

        #[test]
        fn affine_inverse_round_trip(t in geometric(), x in 0.0..100.0f64, y in 0.0..80.0f64) {
            let (a, _, _) = t.affine(100, 80);
            let (u, v) = a.apply(x, y);
            let (bx, by) = a.inverse().unwrap().apply(u, v);
            prop_assert!((bx - x).abs() < 1e-9 && (by - y).abs() < 1e-9);
        }
    }
}
