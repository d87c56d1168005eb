//! Uncompressed single-file NIfTI-1 (`.nii`).
//!
//! Only the fields needed to recover the voxel grid are read: `dim`,
//! `datatype`, `vox_offset`, `scl_slope`/`scl_inter` and the magic. Orientation
//! and affine headers are ignored.

use std::fs;
use std::path::Path;

use super::frame::Frame;
use crate::error::{Error, Result};

const HEADER_LEN: usize = 348;
const MAGIC: [u8; 4] = *b"n+1\0";

/// NIfTI datatype codes accepted by the reader.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiftiDatatype {
    U8,
    I16,
    U16,
    F32,
}

impl NiftiDatatype {
    pub fn code(self) -> i16 {
        match self {
            NiftiDatatype::U8 => 2,
            NiftiDatatype::I16 => 4,
            NiftiDatatype::F32 => 16,
            NiftiDatatype::U16 => 512,
        }
    }

    pub fn from_code(code: i16) -> Result<Self> {
        Ok(match code {
            2 => NiftiDatatype::U8,
            4 => NiftiDatatype::I16,
            16 => NiftiDatatype::F32,
            512 => NiftiDatatype::U16,
            other => return Err(Error::NiftiUnsupportedDatatype(other)),
        })
    }

    pub fn byte_width(self) -> usize {
        match self {
            NiftiDatatype::U8 => 1,
            NiftiDatatype::I16 | NiftiDatatype::U16 => 2,
            NiftiDatatype::F32 => 4,
        }
    }
}

/// Voxel grid, x fastest then y then z.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D {
    dims: (usize, usize, usize),
    voxels: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: (usize, usize, usize), voxels: Vec<f32>) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::DimensionMismatch(format!("volume dims {dims:?} must be >= 1")));
        }
        if nx * ny * nz != voxels.len() {
            return Err(Error::DimensionMismatch(format!(
                "dims {dims:?} need {} voxels, got {}",
                nx * ny * nz,
                voxels.len()
            )));
        }
        Ok(Self { dims, voxels })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn voxels(&self) -> &[f32] {
        &self.voxels
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f32 {
        let (nx, ny, _) = self.dims;
        self.voxels[(z * ny + y) * nx + x]
    }
}

struct Endian(bool);

impl Endian {
    fn i16(&self, b: &[u8], off: usize) -> i16 {
        let a = [b[off], b[off + 1]];
        if self.0 {
            i16::from_le_bytes(a)
        } else {
            i16::from_be_bytes(a)
        }
    }

    fn f32(&self, b: &[u8], off: usize) -> f32 {
        let a = [b[off], b[off + 1], b[off + 2], b[off + 3]];
        if self.0 {
            f32::from_le_bytes(a)
        } else {
            f32::from_be_bytes(a)
        }
    }
}

pub fn read_nifti(path: &Path) -> Result<Volume3D> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_nifti(&bytes)
}

pub fn parse_nifti(bytes: &[u8]) -> Result<Volume3D> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::NiftiTruncated {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[344..348].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::NiftiBadMagic(magic));
    }
    let le = i32::from_le_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let be = i32::from_be_bytes(bytes[0..4].try_into().expect("4 bytes"));
    let e = match (le, be) {
        (348, _) => Endian(true),
        (_, 348) => Endian(false),
        _ => return Err(Error::NiftiHeader(format!("sizeof_hdr is {le}, expected 348"))),
    };

    let ndim = e.i16(bytes, 40);
    if !(1..=7).contains(&ndim) {
        return Err(Error::NiftiHeader(format!("dim[0] = {ndim}")));
    }
    let mut dims = [1usize; 3];
    for (k, d) in dims.iter_mut().enumerate().take(ndim.min(3) as usize) {
        let v = e.i16(bytes, 42 + 2 * k);
        if v < 1 {
            return Err(Error::NiftiHeader(format!("dim[{}] = {v}", k + 1)));
        }
        *d = v as usize;
    }
    for k in 3..ndim as usize {
        let v = e.i16(bytes, 42 + 2 * k);
        if v > 1 {
            log::warn!("NIfTI dim[{}] = {v}; only the first 3D volume is read", k + 1);
        }
    }

    let dtype = NiftiDatatype::from_code(e.i16(bytes, 70))?;
    let vox_offset = e.f32(bytes, 108);
    if !(vox_offset.is_finite() && vox_offset >= HEADER_LEN as f32) {
        return Err(Error::NiftiHeader(format!("vox_offset = {vox_offset}")));
    }
    let start = vox_offset as usize;
    let slope = e.f32(bytes, 112);
    let inter = e.f32(bytes, 116);
    let (slope, inter) = if slope == 0.0 || !slope.is_finite() {
        (1.0, 0.0)
    } else {
        (slope, if inter.is_finite() { inter } else { 0.0 })
    };

    let n = dims[0] * dims[1] * dims[2];
    let w = dtype.byte_width();
    let expected = start + n * w;
    if bytes.len() < expected {
        return Err(Error::NiftiTruncated {
            expected,
            found: bytes.len(),
        });
    }
    let raw = &bytes[start..expected];
    let voxels: Vec<f32> = match dtype {
        NiftiDatatype::U8 => raw.iter().map(|&v| v as f32).collect(),
        NiftiDatatype::I16 => raw.chunks_exact(2).map(|c| e.i16(c, 0) as f32).collect(),
        NiftiDatatype::U16 => raw.chunks_exact(2).map(|c| e.i16(c, 0) as u16 as f32).collect(),
        NiftiDatatype::F32 => raw.chunks_exact(4).map(|c| e.f32(c, 0)).collect(),
    };
    let voxels = if slope == 1.0 && inter == 0.0 {
        voxels
    } else {
        voxels.into_iter().map(|v| v * slope + inter).collect()
    };
    Volume3D::new((dims[0], dims[1], dims[2]), voxels)
}

/// Encodes a little-endian NIfTI-1 file. Voxels are cast to `dtype`
/// (saturating for integer types).
pub fn encode_nifti(v: &Volume3D, dtype: NiftiDatatype) -> Result<Vec<u8>> {
    let (nx, ny, nz) = v.dims();
    for (k, d) in [nx, ny, nz].into_iter().enumerate() {
        if d > i16::MAX as usize {
            return Err(Error::NiftiHeader(format!("dim[{}] = {d} exceeds the NIfTI-1 limit", k + 1)));
        }
    }
    let mut h = vec![0u8; 352];
    h[0..4].copy_from_slice(&348i32.to_le_bytes());
    let dim: [i16; 8] = [3, nx as i16, ny as i16, nz as i16, 1, 1, 1, 1];
    for (k, d) in dim.iter().enumerate() {
        h[40 + 2 * k..42 + 2 * k].copy_from_slice(&d.to_le_bytes());
    }
    h[70..72].copy_from_slice(&dtype.code().to_le_bytes());
    h[72..74].copy_from_slice(&(8 * dtype.byte_width() as i16).to_le_bytes());
    for k in 0..4 {
        h[76 + 4 * k..80 + 4 * k].copy_from_slice(&1f32.to_le_bytes());
    }
    h[108..112].copy_from_slice(&352f32.to_le_bytes());
    h[112..116].copy_from_slice(&1f32.to_le_bytes());
    h[344..348].copy_from_slice(&MAGIC);

    let vals = v.voxels();
    h.reserve(vals.len() * dtype.byte_width());
    for &x in vals {
        match dtype {
            NiftiDatatype::U8 => h.push(x.round().clamp(0.0, 255.0) as u8),
            NiftiDatatype::I16 => h.extend_from_slice(&(x.round() as i16).to_le_bytes()),
            NiftiDatatype::U16 => h.extend_from_slice(&(x.round() as u16).to_le_bytes()),
            NiftiDatatype::F32 => h.extend_from_slice(&x.to_le_bytes()),
        }
    }
    Ok(h)
}

pub fn write_nifti(path: &Path, v: &Volume3D, dtype: NiftiDatatype) -> Result<()> {
    fs::write(path, encode_nifti(v, dtype)?).map_err(|e| Error::io(path, e))
}

/// One gray frame per z index, `nx` wide and `ny` tall, min-max normalized
/// over the whole volume. A constant volume yields all-zero frames.
pub fn slice_axial(v: &Volume3D) -> Vec<Frame> {
    let (nx, ny, nz) = v.dims();
    let (lo, hi) = v
        .voxels()
        .iter()
        .filter(|x| x.is_finite())
        .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = (hi - lo) as f64;
    let map = |x: f32| -> u8 {
        if !(range > 0.0) || !x.is_finite() {
            0
        } else {
            ((x as f64 - lo as f64) / range * 255.0).round().clamp(0.0, 255.0) as u8
        }
    };
    v.voxels()
        .chunks_exact(nx * ny)
        .take(nz)
        .map(|s| Frame::new(nx as u32, ny as u32, 1, s.iter().map(|&x| map(x)).collect()).expect("sized"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(dims: (usize, usize, usize)) -> Volume3D {
        let n = dims.0 * dims.1 * dims.2;
        Volume3D::new(dims, (0..n).map(|i| i as f32).collect()).unwrap()
    }

    #[test]
    fn round_trip_all_datatypes() {
        let v = ramp((4, 5, 6));
        for dt in [NiftiDatatype::U8, NiftiDatatype::I16, NiftiDatatype::U16, NiftiDatatype::F32] {
            let back = parse_nifti(&encode_nifti(&v, dt).unwrap()).unwrap();
            assert_eq!(back.dims(), (4, 5, 6));
            assert_eq!(back.voxels().len(), 120);
            assert_eq!(back, v, "{dt:?}");
        }
    }

    #[test]
    fn float_checksum_matches_generator() {
        let vals: Vec<f32> = (0..3 * 4 * 2).map(|i| (i as f32 * 0.37).sin() * 100.0).collect();
        let expected: f64 = vals.iter().map(|&x| x as f64).sum();
        let v = Volume3D::new((3, 4, 2), vals).unwrap();
        let back = parse_nifti(&encode_nifti(&v, NiftiDatatype::F32).unwrap()).unwrap();
        let sum: f64 = back.voxels().iter().map(|&x| x as f64).sum();
        assert_eq!(sum, expected);
    }

    #[test]
    fn big_endian_header_is_read() {
        let mut b = vec![0u8; 352];
        b[0..4].copy_from_slice(&348i32.to_be_bytes());
        for (k, d) in [3i16, 2, 1, 1].iter().enumerate() {
            b[40 + 2 * k..42 + 2 * k].copy_from_slice(&d.to_be_bytes());
        }
        b[70..72].copy_from_slice(&4i16.to_be_bytes());
        b[108..112].copy_from_slice(&352f32.to_be_bytes());
        b[344..348].copy_from_slice(b"n+1\0");
        b.extend_from_slice(&(-3i16).to_be_bytes());
        b.extend_from_slice(&700i16.to_be_bytes());
        let v = parse_nifti(&b).unwrap();
        assert_eq!(v.voxels(), &[-3.0, 700.0]);
    }

    #[test]
    fn distinct_errors() {
        let v = ramp((2, 2, 2));
        let good = encode_nifti(&v, NiftiDatatype::U8).unwrap();

        let mut bad = good.clone();
        bad[344..348].copy_from_slice(b"ni1\0");
        assert!(matches!(parse_nifti(&bad), Err(Error::NiftiBadMagic(_))));

        let mut bad = good.clone();
        bad[70..72].copy_from_slice(&64i16.to_le_bytes());
        assert!(matches!(parse_nifti(&bad), Err(Error::NiftiUnsupportedDatatype(64))));

        assert!(matches!(
            parse_nifti(&good[..good.len() - 1]),
            Err(Error::NiftiTruncated { expected: 360, found: 359 })
        ));
        assert!(matches!(parse_nifti(&good[..100]), Err(Error::NiftiTruncated { .. })));
    }

    #[test]
    fn slicing() {
        let frames = slice_axial(&ramp((4, 5, 6)));
        assert_eq!(frames.len(), 6);
        assert!(frames.iter().all(|f| f.width() == 4 && f.height() == 5 && f.channels() == 1));
        let max = |f: &Frame| *f.data().iter().max().unwrap();
        assert_eq!(frames[0].data()[0], 0);
        assert_eq!(max(&frames[5]), 255);
        for w in frames.windows(2) {
            assert!(max(&w[0]) < max(&w[1]));
        }
        // row-major x-fastest layout
        let v = ramp((4, 5, 6));
        assert_eq!(v.get(1, 2, 3), ((3 * 5 + 2) * 4 + 1) as f32);

        let flat = Volume3D::new((3, 3, 2), vec![7.0; 18]).unwrap();
        assert!(slice_axial(&flat).iter().all(|f| f.data().iter().all(|&p| p == 0)));
    }

    #[test]
    fn slope_is_applied() {
        let v = ramp((2, 1, 1));
        let mut b = encode_nifti(&v, NiftiDatatype::U8).unwrap();
        b[112..116].copy_from_slice(&2f32.to_le_bytes());
        b[116..120].copy_from_slice(&10f32.to_le_bytes());
        assert_eq!(parse_nifti(&b).unwrap().voxels(), &[10.0, 12.0]);
    }
}
