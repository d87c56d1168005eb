//! Recorded model outputs replayed bit-exactly.
//!
//! File layout: one JSON header line terminated by `\n`, then the raw
//! little-endian `f32` payload of every output tensor, entry by entry, in
//! header order, with no padding.
//!
//! ```text
//! {"format":"sonodet-replay","version":1,"mode":"keyed","input_shape":[1,3,640,640],
//!  "count":2,"entries":[{"input_checksum":"9f2c…","outputs":[[1,5,8400]]},
//!                       {"input_checksum":"04be…","outputs":[[1,5,8400]]}]}
//! <8400·5·4 bytes><8400·5·4 bytes>
//! ```
//!
//! `input_checksum` is the SHA-256 hex digest of the input tensor's
//! little-endian `f32` bytes ([`RawTensor::checksum`]); it may be `null` in
//! sequential and cycle fixtures.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{check_input, InferenceBackend};
use crate::error::{Error, Result};
use crate::tensor::RawTensor;

pub const FORMAT_TAG: &str = "sonodet-replay";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplayMode {
    /// Entries in order; running past the end is an error.
    #[default]
    Sequential,
    /// Entry chosen by the input tensor's checksum.
    Keyed,
    /// Entries in order, wrapping around (long benchmark runs).
    Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayEntry {
    pub input_checksum: Option<String>,
    pub outputs: Vec<RawTensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayFixture {
    pub mode: ReplayMode,
    pub input_shape: Vec<usize>,
    pub entries: Vec<ReplayEntry>,
}

#[derive(Serialize, Deserialize)]
struct HeaderEntry {
    input_checksum: Option<String>,
    outputs: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    mode: ReplayMode,
    input_shape: Vec<usize>,
    count: usize,
    entries: Vec<HeaderEntry>,
}

impl ReplayFixture {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            mode: self.mode,
            input_shape: self.input_shape.clone(),
            count: self.entries.len(),
            entries: self
                .entries
                .iter()
                .map(|e| HeaderEntry {
                    input_checksum: e.input_checksum.clone(),
                    outputs: e.outputs.iter().map(|t| t.shape().to_vec()).collect(),
                })
                .collect(),
        };
        let mut out = serde_json::to_vec(&header)?;
        out.push(b'\n');
        for e in &self.entries {
            for t in &e.outputs {
                out.extend_from_slice(&t.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = bytes
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::ReplayFormat("missing header line".into()))?;
        let header: Header =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::ReplayFormat(format!("header: {e}")))?;
        if header.format != FORMAT_TAG {
            return Err(Error::ReplayFormat(format!("format tag `{}`", header.format)));
        }
        if header.version != FORMAT_VERSION {
            return Err(Error::ReplayFormat(format!("unsupported version {}", header.version)));
        }
        if header.count != header.entries.len() {
            return Err(Error::ReplayFormat(format!(
                "count {} but {} entries",
                header.count,
                header.entries.len()
            )));
        }
        let mut pos = nl + 1;
        let mut entries = Vec::with_capacity(header.entries.len());
        for (k, e) in header.entries.into_iter().enumerate() {
            if header.mode == ReplayMode::Keyed && e.input_checksum.is_none() {
                return Err(Error::ReplayFormat(format!("entry {k} has no checksum in keyed mode")));
            }
            let mut outputs = Vec::with_capacity(e.outputs.len());
            for shape in e.outputs {
                let n: usize = shape.iter().product();
                let end = pos + 4 * n;
                if end > bytes.len() {
                    return Err(Error::ReplayFormat(format!("payload truncated in entry {k}")));
                }
                let data = bytes[pos..end]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                outputs.push(RawTensor::new(shape, data).map_err(|e| Error::ReplayFormat(e.to_string()))?);
                pos = end;
            }
            entries.push(ReplayEntry {
                input_checksum: e.input_checksum,
                outputs,
            });
        }
        if pos != bytes.len() {
            return Err(Error::ReplayFormat(format!("{} trailing bytes", bytes.len() - pos)));
        }
        Ok(Self {
            mode: header.mode,
            input_shape: header.input_shape,
            entries,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
    }
}

pub struct ReplayBackend {
    fixture: ReplayFixture,
    cursor: usize,
    by_checksum: HashMap<String, usize>,
}

impl ReplayBackend {
    pub fn new(fixture: ReplayFixture) -> Result<Self> {
        if fixture.entries.is_empty() {
            return Err(Error::ReplayFormat("fixture has no entries".into()));
        }
        let mut by_checksum = HashMap::new();
        for (k, e) in fixture.entries.iter().enumerate() {
            if let Some(c) = &e.input_checksum {
                by_checksum.entry(c.clone()).or_insert(k);
            }
        }
        Ok(Self {
            fixture,
            cursor: 0,
            by_checksum,
        })
    }

    pub fn mode(&self) -> ReplayMode {
        self.fixture.mode
    }
}

pub fn replay_backend(fixture_path: &Path) -> Result<ReplayBackend> {
    ReplayBackend::new(ReplayFixture::read(fixture_path)?)
}

impl InferenceBackend for ReplayBackend {
    fn name(&self) -> &str {
        "replay"
    }

    fn input_shape(&self) -> &[usize] {
        &self.fixture.input_shape
    }

    fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>> {
        check_input(input, &self.fixture.input_shape)?;
        let n = self.fixture.entries.len();
        let k = match self.fixture.mode {
            ReplayMode::Sequential => {
                if self.cursor >= n {
                    return Err(Error::ReplayExhausted(n));
                }
                self.cursor
            }
            ReplayMode::Cycle => self.cursor % n,
            ReplayMode::Keyed => {
                let c = input.checksum();
                *self.by_checksum.get(&c).ok_or(Error::ReplayChecksumMismatch(c))?
            }
        };
        self.cursor += 1;
        Ok(self.fixture.entries[k].outputs.clone())
    }
}

/// Wraps a backend and records every call as a keyed replay entry.
pub struct Recorder<B> {
    inner: B,
    entries: Vec<ReplayEntry>,
}

impl<B: InferenceBackend> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Self {
            inner,
            entries: Vec::new(),
        }
    }

    pub fn into_fixture(self, mode: ReplayMode) -> ReplayFixture {
        ReplayFixture {
            mode,
            input_shape: self.inner.input_shape().to_vec(),
            entries: self.entries,
        }
    }
}

impl<B: InferenceBackend> InferenceBackend for Recorder<B> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn input_shape(&self) -> &[usize] {
        self.inner.input_shape()
    }

    fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>> {
        let out = self.inner.infer(input)?;
        self.entries.push(ReplayEntry {
            input_checksum: Some(input.checksum()),
            outputs: out.clone(),
        });
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(shape: Vec<usize>, seed: f32) -> RawTensor {
        let n = shape.iter().product();
        RawTensor::new(shape, (0..n).map(|i| (i as f32 * 0.37 + seed).sin() * 1e3).collect()).unwrap()
    }

    fn fixture(mode: ReplayMode) -> ReplayFixture {
        let inputs = [tensor(vec![1, 3, 4, 4], 0.0), tensor(vec![1, 3, 4, 4], 1.0)];
        ReplayFixture {
            mode,
            input_shape: vec![1, 3, 4, 4],
            entries: inputs
                .iter()
                .enumerate()
                .map(|(k, i)| ReplayEntry {
                    input_checksum: Some(i.checksum()),
                    outputs: vec![tensor(vec![1, 5, 7], k as f32), tensor(vec![1, 2, 1, 1], -(k as f32))],
                })
                .collect(),
        }
    }

    #[test]
    fn bytes_round_trip_bit_exact() {
        let mut f = fixture(ReplayMode::Keyed);
        f.entries[0].outputs[0].data_mut()[3] = f32::from_bits(0x7fc0_1234);
        f.entries[0].outputs[0].data_mut()[4] = -0.0;
        let back = ReplayFixture::from_bytes(&f.to_bytes().unwrap()).unwrap();
        for (a, b) in f.entries.iter().zip(&back.entries) {
            for (x, y) in a.outputs.iter().zip(&b.outputs) {
                assert_eq!(x.to_le_bytes(), y.to_le_bytes());
            }
        }
    }

    #[test]
    fn single_entry_sequential() {
        let mut f = fixture(ReplayMode::Sequential);
        f.entries.truncate(1);
        let expected = f.entries[0].outputs.clone();
        let mut b = ReplayBackend::new(f).unwrap();
        let input = RawTensor::zeros(vec![1, 3, 4, 4]);
        assert_eq!(b.infer(&input).unwrap(), expected);
        assert!(matches!(b.infer(&input), Err(Error::ReplayExhausted(1))));
    }

    #[test]
    fn keyed_lookup_and_mismatch() {
        let f = fixture(ReplayMode::Keyed);
        let second = f.entries[1].outputs.clone();
        let mut b = ReplayBackend::new(f).unwrap();
        assert_eq!(b.infer(&tensor(vec![1, 3, 4, 4], 1.0)).unwrap(), second);
        assert_eq!(b.infer(&tensor(vec![1, 3, 4, 4], 1.0)).unwrap(), second);
        assert!(matches!(
            b.infer(&RawTensor::zeros(vec![1, 3, 4, 4])),
            Err(Error::ReplayChecksumMismatch(_))
        ));
        assert!(matches!(b.infer(&RawTensor::zeros(vec![1, 3, 8, 8])), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn cycle_wraps() {
        let f = fixture(ReplayMode::Cycle);
        let first = f.entries[0].outputs.clone();
        let mut b = ReplayBackend::new(f).unwrap();
        let input = RawTensor::zeros(vec![1, 3, 4, 4]);
        b.infer(&input).unwrap();
        b.infer(&input).unwrap();
        assert_eq!(b.infer(&input).unwrap(), first);
    }

    /// Bytes assembled by hand the way an external writer would produce them.
    #[test]
    fn reads_externally_written_fixture() {
        let header = r#"{"format":"sonodet-replay","version":1,"mode":"sequential","input_shape":[1,3,2,2],"count":1,"entries":[{"input_checksum":null,"outputs":[[1,5,1]]}]}"#;
        let mut bytes = header.as_bytes().to_vec();
        bytes.push(b'\n');
        for v in [1.0f32, 2.0, 3.0, 4.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let f = ReplayFixture::from_bytes(&bytes).unwrap();
        assert_eq!(f.entries[0].outputs[0].data(), &[1.0, 2.0, 3.0, 4.0, 0.5]);
        assert_eq!(f.to_bytes().unwrap(), bytes);

        let mut short = bytes.clone();
        short.pop();
        assert!(matches!(ReplayFixture::from_bytes(&short), Err(Error::ReplayFormat(_))));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(ReplayFixture::from_bytes(&long), Err(Error::ReplayFormat(_))));
        let mut keyed = header.replace("sequential", "keyed").into_bytes();
        keyed.extend_from_slice(&bytes[header.len()..]);
        assert!(matches!(ReplayFixture::from_bytes(&keyed), Err(Error::ReplayFormat(_))));
    }

    #[test]
    fn recorder_produces_keyed_fixture() {
        let src = fixture(ReplayMode::Sequential);
        let inner = ReplayBackend::new(src.clone()).unwrap();
        let mut rec = Recorder::new(inner);
        let a = tensor(vec![1, 3, 4, 4], 5.0);
        let b = tensor(vec![1, 3, 4, 4], 6.0);
        let oa = rec.infer(&a).unwrap();
        let ob = rec.infer(&b).unwrap();
        let mut keyed = ReplayBackend::new(rec.into_fixture(ReplayMode::Keyed)).unwrap();
        assert_eq!(keyed.infer(&b).unwrap(), ob);
        assert_eq!(keyed.infer(&a).unwrap(), oa);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.bin");
        let f = fixture(ReplayMode::Cycle);
        f.write(&p).unwrap();
        assert_eq!(ReplayFixture::read(&p).unwrap(), f);
        assert!(replay_backend(&dir.path().join("missing.bin")).is_err());
    }
}
