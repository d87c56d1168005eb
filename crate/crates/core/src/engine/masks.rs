use super::decode::Candidate;
use super::preprocess::ScaleInfo;
use crate::error::{Error, Result};
use crate::geometry::{BitMask, Detection};
use crate::tensor::RawTensor;

/// Mask probability threshold (strict).
pub const MASK_THRESHOLD: f32 = 0.5;

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// Instance masks from prototype coefficients: `σ(coeffs · protos) > 0.5`.
///
/// Prototype cells are evaluated only over the survivor's box (crop at
/// prototype resolution), upsampled nearest to the source frame, and then
/// trimmed to the pixels whose centers lie inside the box.
pub fn decode_masks(protos: &RawTensor, survivors: Vec<Candidate>, scales: &ScaleInfo) -> Result<Vec<Detection>> {
    let &[1, m, ph, pw] = protos.shape() else {
        return Err(Error::ShapeMismatch(format!("prototype shape {:?}, expected (1, M, H, W)", protos.shape())));
    };
    let p = protos.data();
    let (w, h) = (scales.source_width, scales.source_height);
    let s = scales.input_size as f64;
    let (cell_w, cell_h) = (s / pw as f64, s / ph as f64);
    let col_of = |i: u32| (((i as f64 + 0.5) * scales.sx / cell_w) as usize).min(pw - 1);
    let row_of = |j: u32| (((j as f64 + 0.5) * scales.sy / cell_h) as usize).min(ph - 1);

    survivors
        .into_iter()
        .map(|c| {
            if c.coeffs.len() != m {
                return Err(Error::ShapeMismatch(format!("{} mask coefficients for {m} prototypes", c.coeffs.len())));
            }
            let mut det = c.detection;
            let mut mask = BitMask::new(w, h);
            let b = det.bbox;
            let i0 = (b.x1 - 0.5).ceil().max(0.0) as u32;
            let i1 = ((b.x2 - 0.5).ceil().max(0.0) as u32).min(w);
            let j0 = (b.y1 - 0.5).ceil().max(0.0) as u32;
            let j1 = ((b.y2 - 0.5).ceil().max(0.0) as u32).min(h);
            if i0 < i1 && j0 < j1 {
                let (u0, u1) = (col_of(i0), col_of(i1 - 1));
                let (v0, v1) = (row_of(j0), row_of(j1 - 1));
                let cw = u1 - u0 + 1;
                let mut cells = vec![false; cw * (v1 - v0 + 1)];
                for v in v0..=v1 {
                    for u in u0..=u1 {
                        let mut acc = 0f32;
                        for (k, &ck) in c.coeffs.iter().enumerate() {
                            acc += ck * p[(k * ph + v) * pw + u];
                        }
                        cells[(v - v0) * cw + (u - u0)] = sigmoid(acc) > MASK_THRESHOLD;
                    }
                }
                for j in j0..j1 {
                    let v = row_of(j) - v0;
                    for i in i0..i1 {
                        if cells[v * cw + col_of(i) - u0] {
                            mask.set(i, j, true);
                        }
                    }
                }
            }
            det.mask = Some(mask);
            Ok(det)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    fn cand(b: BBox, coeffs: Vec<f32>) -> Candidate {
        Candidate {
            detection: Detection::new(b, 0.9, 0),
            anchor: 0,
            coeffs,
        }
    }

    fn protos(m: usize, side: usize, fill: impl Fn(usize, usize, usize) -> f32) -> RawTensor {
        let mut d = Vec::with_capacity(m * side * side);
        for k in 0..m {
            for v in 0..side {
                for u in 0..side {
                    d.push(fill(k, v, u));
                }
            }
        }
        RawTensor::new(vec![1, m, side, side], d).unwrap()
    }

    #[test]
    fn zero_coefficients_give_empty_mask() {
        let s = ScaleInfo::new(64, 64, 64).unwrap();
        let out = decode_masks(&protos(4, 16, |_, _, _| 3.0), vec![cand(BBox::new(5.0, 5.0, 40.0, 30.0), vec![0.0; 4])], &s).unwrap();
        assert!(out[0].mask.as_ref().unwrap().is_empty());
    }

    #[test]
    fn saturated_prototype_fills_the_box_exactly() {
        for (w, h) in [(64, 64), (800, 600), (333, 517)] {
            let s = ScaleInfo::new(w, h, 640).unwrap();
            let pr = protos(2, 160, |k, _, _| if k == 0 { 10.0 } else { -3.0 });
            let b = BBox::new(13.3, 20.7, w as f64 * 0.6, h as f64 * 0.8);
            let out = decode_masks(&pr, vec![cand(b, vec![1.0, 0.0])], &s).unwrap();
            assert_eq!(out[0].mask.as_ref().unwrap(), &BitMask::from_box(&b, w, h));
        }
    }

    #[test]
    fn zero_area_box_gives_empty_mask() {
        let s = ScaleInfo::new(64, 64, 64).unwrap();
        let out = decode_masks(&protos(1, 16, |_, _, _| 10.0), vec![cand(BBox::new(10.0, 10.0, 10.0, 30.0), vec![1.0])], &s).unwrap();
        assert!(out[0].mask.as_ref().unwrap().is_empty());
    }

    #[test]
    fn mask_follows_prototype_pattern() {
        // left half of the prototype positive, right half negative
        let s = ScaleInfo::new(64, 64, 64).unwrap();
        let pr = protos(1, 16, |_, _, u| if u < 8 { 5.0 } else { -5.0 });
        let out = decode_masks(&pr, vec![cand(BBox::new(0.0, 0.0, 64.0, 64.0), vec![1.0])], &s).unwrap();
        let m = out[0].mask.as_ref().unwrap();
        assert_eq!(m.bbox(), Some(BBox::new(0.0, 0.0, 32.0, 64.0)));
        assert_eq!(m.count(), 32 * 64);
    }

    #[test]
    fn shape_errors() {
        let s = ScaleInfo::new(64, 64, 64).unwrap();
        let bad = RawTensor::new(vec![1, 2, 4], vec![0.0; 8]).unwrap();
        assert!(decode_masks(&bad, vec![], &s).is_err());
        assert!(decode_masks(&protos(2, 4, |_, _, _| 0.0), vec![cand(BBox::new(0.0, 0.0, 1.0, 1.0), vec![1.0])], &s).is_err());
    }
}
