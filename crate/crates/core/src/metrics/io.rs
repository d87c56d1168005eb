//! Line-delimited JSON detection records.
//!
//! One object per line:
//!
//! ```text
//! {"image_id":"p01_012","class_id":0,"score":0.91,"bbox":[12.0,40.5,200.0,181.0]}
//! {"image_id":"p01_013","class_id":0,"score":0.88,"bbox":[...],"mask":{"width":640,"height":480,"counts":[1021,14,...]}}
//! ```
//!
//! `bbox` is `x1 y1 x2 y2` in absolute source-image pixels. `mask` is a
//! row-major run-length encoding: alternating runs of unset and set pixels,
//! starting with an unset run (which may be 0).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::evaluate::ByImage;
use crate::error::{Error, Result};
use crate::geometry::{BBox, BitMask, ClassId, Detection};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    pub width: u32,
    pub height: u32,
    pub counts: Vec<u32>,
}

impl RleMask {
    pub fn encode(mask: &BitMask) -> Self {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for &b in mask.bits() {
            if b != current {
                counts.push(run);
                run = 0;
                current = b;
            }
            run += 1;
        }
        counts.push(run);
        Self {
            width: mask.width(),
            height: mask.height(),
            counts,
        }
    }

    pub fn decode(&self) -> Result<BitMask> {
        let n = self.width as usize * self.height as usize;
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total != n as u64 {
            return Err(Error::DimensionMismatch(format!(
                "RLE covers {total} pixels, mask is {}x{}",
                self.width, self.height
            )));
        }
        let mut bits = Vec::with_capacity(n);
        for (k, &c) in self.counts.iter().enumerate() {
            bits.extend(std::iter::repeat_n(k % 2 == 1, c as usize));
        }
        BitMask::from_bits(self.width, self.height, bits)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub class_id: ClassId,
    pub score: f64,
    pub bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<RleMask>,
}

impl DetectionRecord {
    pub fn from_detection(image_id: &str, d: &Detection) -> Self {
        Self {
            image_id: image_id.to_string(),
            class_id: d.class_id,
            score: d.score,
            bbox: [d.bbox.x1, d.bbox.y1, d.bbox.x2, d.bbox.y2],
            mask: d.mask.as_ref().map(RleMask::encode),
        }
    }

    pub fn to_detection(&self) -> Result<Detection> {
        let [x1, y1, x2, y2] = self.bbox;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidInput(format!("score {} outside [0, 1]", self.score)));
        }
        Ok(Detection {
            bbox: BBox::new(x1, y1, x2, y2),
            score: self.score,
            class_id: self.class_id,
            mask: self.mask.as_ref().map(RleMask::decode).transpose()?,
        })
    }
}

pub fn write_detections_to<W: Write>(mut w: W, dets: &ByImage<Detection>) -> Result<()> {
    for (id, list) in dets {
        for d in list {
            serde_json::to_writer(&mut w, &DetectionRecord::from_detection(id, d))?;
            w.write_all(b"\n").map_err(|e| Error::io("<detections>", e))?;
        }
    }
    Ok(())
}

pub fn write_detections(path: &Path, dets: &ByImage<Detection>) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_detections_to(&mut w, dets)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path) -> Result<ByImage<Detection>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = ByImage::new();
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DetectionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", path.display(), n + 1)))?;
        let det = rec.to_detection()?;
        out.entry(rec.image_id).or_insert_with(Vec::new).push(det);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn rle_round_trip(w in 1u32..20, h in 1u32..20, seed in any::<u64>()) {
            let bits: Vec<bool> = (0..w * h).map(|k| (seed.rotate_left(k % 64) ^ k as u64) & 3 == 0).collect();
            let m = BitMask::from_bits(w, h, bits).unwrap();
            prop_assert_eq!(RleMask::encode(&m).decode().unwrap(), m);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let mut d = Detection::new(BBox::new(1.0, 2.0, 3.5, 4.25), 0.75, 0);
        d.mask = Some(BitMask::from_box(&d.bbox, 8, 8));
        let dets = ByImage::from([("a".to_string(), vec![d.clone(), Detection::new(BBox::new(0.0, 0.0, 1.0, 1.0), 0.5, 0)])]);
        write_detections(&p, &dets).unwrap();
        assert_eq!(read_detections(&p).unwrap(), dets);
    }

    #[test]
    fn bad_rle_rejected() {
        let r = RleMask { width: 2, height: 2, counts: vec![1, 1] };
        assert!(r.decode().is_err());
    }
}
