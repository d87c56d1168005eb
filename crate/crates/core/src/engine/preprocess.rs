use serde::{Deserialize, Serialize};

use crate::datakit::Frame;
use crate::error::{Error, Result};
use crate::tensor::RawTensor;

/// Stretch factors from a source frame to the square model input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleInfo {
    /// `input_size / source_width`.
    pub sx: f64,
    /// `input_size / source_height`.
    pub sy: f64,
    pub source_width: u32,
    pub source_height: u32,
    pub input_size: u32,
}

impl ScaleInfo {
    pub fn new(source_width: u32, source_height: u32, input_size: u32) -> Result<Self> {
        if source_width == 0 || source_height == 0 || input_size == 0 {
            return Err(Error::InvalidInput(format!(
                "zero dimension: source {source_width}x{source_height}, input {input_size}"
            )));
        }
        Ok(Self {
            sx: input_size as f64 / source_width as f64,
            sy: input_size as f64 / source_height as f64,
            source_width,
            source_height,
            input_size,
        })
    }

    /// Model-input coordinates to source-image coordinates.
    pub fn to_source(&self, x: f64, y: f64) -> (f64, f64) {
        (x / self.sx, y / self.sy)
    }

    pub fn to_model(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.sx, y * self.sy)
    }
}

/// Sampling taps for one output axis: `(i0, i1, w1)` per output index.
fn taps(src: u32, dst: u32) -> Vec<(usize, usize, f32)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|o| {
            let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(src as usize - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

/// Stretch-resizes to `(1, 3, S, S)` with bilinear sampling (pixel-center
/// aligned), values in `[0, 1]`. Gray frames are replicated to three
/// channels.
pub fn preprocess(frame: &Frame, input_size: u32) -> Result<(RawTensor, ScaleInfo)> {
    let info = ScaleInfo::new(frame.width(), frame.height(), input_size)?;
    let s = input_size as usize;
    let plane = s * s;
    let ch = frame.channels() as usize;
    let src = frame.data();
    let mut out = vec![0f32; 3 * plane];
    const INV: f32 = 1.0 / 255.0;

    if frame.width() == input_size && frame.height() == input_size {
        for (p, px) in src.chunks_exact(ch).enumerate() {
            for c in 0..3 {
                out[c * plane + p] = px[c.min(ch - 1)] as f32 * INV;
            }
        }
    } else {
        let xt = taps(frame.width(), input_size);
        let yt = taps(frame.height(), input_size);
        let w = frame.width() as usize;
        let planes = ch.min(3);
        for (oy, &(y0, y1, wy)) in yt.iter().enumerate() {
            let (r0, r1) = (y0 * w, y1 * w);
            for (ox, &(x0, x1, wx)) in xt.iter().enumerate() {
                for c in 0..planes {
                    let g = |r: usize, x: usize| src[(r + x) * ch + c] as f32;
                    let top = g(r0, x0) + (g(r0, x1) - g(r0, x0)) * wx;
                    let bot = g(r1, x0) + (g(r1, x1) - g(r1, x0)) * wx;
                    out[c * plane + oy * s + ox] = (top + (bot - top) * wy) * INV;
                }
            }
        }
        if planes == 1 {
            let (first, rest) = out.split_at_mut(plane);
            rest[..plane].copy_from_slice(first);
            rest[plane..].copy_from_slice(first);
        }
    }
    Ok((RawTensor::new(vec![1, 3, s, s], out)?, info))
}
