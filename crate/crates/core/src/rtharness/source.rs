//! Frame sources: synthetic load generator, image directories, Y4M video
//! files, and the capture-device placeholder.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datakit::Frame;
use crate::error::{Error, Result};
use crate::geometry::BBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    VideoFile,
    CaptureDevice,
    ImageDir,
    Synthetic,
}

/// A finite or live stream of frames. `next_frame` returns `Ok(None)` once
/// at end of stream; callers do not poll again afterwards.
pub trait FrameSource: Send {
    fn kind(&self) -> SourceKind;
    /// Frames per second to pace at; 0 means as fast as possible.
    fn nominal_fps(&self) -> f64;
    fn len_hint(&self) -> Option<usize>;
    fn next_frame(&mut self) -> Result<Option<Frame>>;
}

impl<S: FrameSource + ?Sized> FrameSource for Box<S> {
    fn kind(&self) -> SourceKind {
        (**self).kind()
    }

    fn nominal_fps(&self) -> f64 {
        (**self).nominal_fps()
    }

    fn len_hint(&self) -> Option<usize> {
        (**self).len_hint()
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        (**self).next_frame()
    }
}

/// Deterministic speckle frames, each with one bright ellipse whose
/// bounding box is kept as ground truth.
pub struct SyntheticSource {
    width: u32,
    height: u32,
    n_frames: usize,
    fps: f64,
    rng: ChaCha8Rng,
    emitted: usize,
    truth: Vec<BBox>,
}

/// Ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        ((x - self.cx) / self.rx).powi(2) + ((y - self.cy) / self.ry).powi(2) <= 1.0
    }

    pub fn bbox(&self, width: u32, height: u32) -> BBox {
        BBox::new(self.cx - self.rx, self.cy - self.ry, self.cx + self.rx, self.cy + self.ry).clamp(width as f64, height as f64)
    }
}

pub fn synthetic_source(width: u32, height: u32, n_frames: usize, fps: f64, seed: u64) -> Result<SyntheticSource> {
    if n_frames == 0 {
        return Err(Error::InvalidInput("synthetic source needs at least one frame".into()));
    }
    if width < 8 || height < 8 {
        return Err(Error::InvalidInput(format!("synthetic frames must be at least 8x8, got {width}x{height}")));
    }
    if !(fps >= 0.0 && fps.is_finite()) {
        return Err(Error::InvalidInput(format!("fps {fps} must be finite and >= 0")));
    }
    Ok(SyntheticSource {
        width,
        height,
        n_frames,
        fps,
        rng: ChaCha8Rng::seed_from_u64(seed),
        emitted: 0,
        truth: Vec::with_capacity(n_frames),
    })
}

impl SyntheticSource {
    /// Ground-truth boxes of the frames emitted so far, by frame index.
    pub fn truth(&self) -> &[BBox] {
        &self.truth
    }

    /// JSON lines `{"frame_id": k, "bbox": [x1, y1, x2, y2]}`.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for (k, b) in self.truth.iter().enumerate() {
            serde_json::to_writer(&mut out, &serde_json::json!({"frame_id": k, "bbox": [b.x1, b.y1, b.x2, b.y2]}))?;
            out.push(b'\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    fn render(&mut self) -> Frame {
        let (w, h) = (self.width as f64, self.height as f64);
        let e = Ellipse {
            cx: self.rng.random_range(0.2..0.8) * w,
            cy: self.rng.random_range(0.2..0.8) * h,
            rx: self.rng.random_range(0.04..0.15) * w,
            ry: self.rng.random_range(0.04..0.15) * h,
        };
        let mut data = vec![0u8; (self.width * self.height) as usize];
        self.rng.fill_bytes(&mut data);
        let (jy0, jy1) = (
            ((e.cy - e.ry).floor().max(0.0)) as u32,
            ((e.cy + e.ry).ceil().min(h)) as u32,
        );
        for j in 0..self.height {
            let row = &mut data[(j * self.width) as usize..((j + 1) * self.width) as usize];
            let depth = j as f64 / h;
            let bg = (50.0 + 40.0 * (1.0 - depth)) as u16;
            let inside_rows = j >= jy0 && j < jy1;
            for (i, px) in row.iter_mut().enumerate() {
                let speckle = (*px as u16) >> 3; // 0..31
                let base = if inside_rows && e.contains(i as f64 + 0.5, j as f64 + 0.5) { 200 } else { bg };
                *px = (base + speckle).min(255) as u8;
            }
        }
        self.truth.push(e.bbox(self.width, self.height));
        Frame::new(self.width, self.height, 1, data).expect("sized")
    }
}

impl FrameSource for SyntheticSource {
    fn kind(&self) -> SourceKind {
        SourceKind::Synthetic
    }

    fn nominal_fps(&self) -> f64 {
        self.fps
    }

    fn len_hint(&self) -> Option<usize> {
        Some(self.n_frames)
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.emitted >= self.n_frames {
            return Ok(None);
        }
        self.emitted += 1;
        Ok(Some(self.render()))
    }
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "bmp"];

/// Images of a directory in file-name order.
pub struct ImageDirSource {
    paths: Vec<PathBuf>,
    next: usize,
    fps: f64,
}

pub fn image_dir_source(dir: &Path, fps: f64) -> Result<ImageDirSource> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Source(format!("{}: no images", dir.display())));
    }
    Ok(ImageDirSource { paths, next: 0, fps })
}

impl ImageDirSource {
    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }
}

impl FrameSource for ImageDirSource {
    fn kind(&self) -> SourceKind {
        SourceKind::ImageDir
    }

    fn nominal_fps(&self) -> f64 {
        self.fps
    }

    fn len_hint(&self) -> Option<usize> {
        Some(self.paths.len())
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        let Some(p) = self.paths.get(self.next) else {
            return Ok(None);
        };
        self.next += 1;
        Frame::load(p).map(Some)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Chroma {
    Mono,
    C420,
    C422,
    C444,
}

impl Chroma {
    fn chroma_bytes(&self, w: usize, h: usize) -> usize {
        match self {
            Chroma::Mono => 0,
            Chroma::C420 => 2 * w.div_ceil(2) * h.div_ceil(2),
            Chroma::C422 => 2 * w.div_ceil(2) * h,
            Chroma::C444 => 2 * w * h,
        }
    }
}

/// YUV4MPEG2 (`.y4m`) video. Frames are decoded as the luma plane, which
/// is the whole signal for B-mode ultrasound. Other containers can be
/// converted with `ffmpeg -i in.mp4 -pix_fmt gray out.y4m`.
pub struct Y4mSource {
    reader: BufReader<File>,
    path: PathBuf,
    width: u32,
    height: u32,
    chroma: Chroma,
    file_fps: f64,
    fps: f64,
    frames: Option<usize>,
    done: bool,
}

/// Opens a Y4M file. `realtime` paces playback at the file's frame rate.
pub fn y4m_source(path: &Path, realtime: bool) -> Result<Y4mSource> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let total = f.metadata().map(|m| m.len() as usize).ok();
    let mut reader = BufReader::new(f);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let mut tokens = header.trim_end().split(' ');
    if tokens.next() != Some("YUV4MPEG2") {
        return Err(Error::Source(format!("{}: not a YUV4MPEG2 stream", path.display())));
    }
    let (mut w, mut h, mut fps, mut chroma) = (0u32, 0u32, 0.0f64, Chroma::C420);
    for t in tokens {
        let (key, val) = t.split_at(1);
        match key {
            "W" => w = val.parse().map_err(|_| Error::Source(format!("bad width `{val}`")))?,
            "H" => h = val.parse().map_err(|_| Error::Source(format!("bad height `{val}`")))?,
            "F" => {
                let (n, d) = val.split_once(':').unwrap_or((val, "1"));
                let (n, d): (f64, f64) = (n.parse().unwrap_or(0.0), d.parse().unwrap_or(1.0));
                fps = if d > 0.0 { n / d } else { 0.0 };
            }
            "C" => {
                chroma = match val {
                    v if v.starts_with("420") => Chroma::C420,
                    v if v.starts_with("422") => Chroma::C422,
                    v if v.starts_with("444") && !v.contains("alpha") => Chroma::C444,
                    "mono" => Chroma::Mono,
                    other => return Err(Error::Source(format!("unsupported Y4M colorspace `{other}`"))),
                }
            }
            _ => {}
        }
    }
    if w == 0 || h == 0 {
        return Err(Error::Source(format!("{}: missing frame dimensions", path.display())));
    }
    let frame_bytes = w as usize * h as usize + chroma.chroma_bytes(w as usize, h as usize);
    let frames = total.map(|t| t.saturating_sub(header.len()) / (frame_bytes + 6));
    Ok(Y4mSource {
        reader,
        path: path.to_path_buf(),
        width: w,
        height: h,
        chroma,
        file_fps: fps,
        fps: if realtime { fps } else { 0.0 },
        frames,
        done: false,
    })
}

impl Y4mSource {
    pub fn file_fps(&self) -> f64 {
        self.file_fps
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

impl FrameSource for Y4mSource {
    fn kind(&self) -> SourceKind {
        SourceKind::VideoFile
    }

    fn nominal_fps(&self) -> f64 {
        self.fps
    }

    fn len_hint(&self) -> Option<usize> {
        self.frames
    }

    fn next_frame(&mut self) -> Result<Option<Frame>> {
        if self.done {
            return Ok(None);
        }
        let mut line = Vec::new();
        let n = self
            .reader
            .read_until(b'\n', &mut line)
            .map_err(|e| Error::io(&self.path, e))?;
        if n == 0 {
            self.done = true;
            return Ok(None);
        }
        if !line.starts_with(b"FRAME") {
            return Err(Error::Source(format!("{}: expected FRAME marker", self.path.display())));
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let mut luma = vec![0u8; w * h];
        let mut chroma = vec![0u8; self.chroma.chroma_bytes(w, h)];
        self.reader
            .read_exact(&mut luma)
            .and_then(|_| self.reader.read_exact(&mut chroma))
            .map_err(|_| Error::Source(format!("{}: truncated frame", self.path.display())))?;
        Frame::new(self.width, self.height, 1, luma).map(Some)
    }
}

/// Writes gray frames as a `Cmono` Y4M stream.
pub fn write_y4m(path: &Path, frames: &[Frame], fps: u32) -> Result<()> {
    let first = frames.first().ok_or(Error::EmptyInput("frames"))?;
    let (w, h) = (first.width(), first.height());
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(f);
    let io = |e| Error::io(path, e);
    writeln!(out, "YUV4MPEG2 W{w} H{h} F{fps}:1 Ip A1:1 Cmono").map_err(io)?;
    for fr in frames {
        if (fr.width(), fr.height()) != (w, h) {
            return Err(Error::DimensionMismatch(format!(
                "frame {}x{} in a {w}x{h} stream",
                fr.width(),
                fr.height()
            )));
        }
        out.write_all(b"FRAME\n").map_err(io)?;
        if fr.channels() == 1 {
            out.write_all(fr.data()).map_err(io)?;
        } else {
            let luma: Vec<u8> = fr
                .data()
                .chunks_exact(3)
                .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
                .collect();
            out.write_all(&luma).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Live capture devices need a platform video stack this build does not
/// link; recorded Y4M or image sequences stand in.
pub fn capture_source(device: &str) -> Result<Box<dyn FrameSource>> {
    Err(Error::Source(format!(
        "capture device `{device}` is not supported in this build; record to Y4M or an image directory"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drain(s: &mut dyn FrameSource) -> Vec<Frame> {
        let mut v = Vec::new();
        while let Some(f) = s.next_frame().unwrap() {
            v.push(f);
        }
        v
    }

    #[test]
    fn synthetic_emits_exactly_n() {
        let mut s = synthetic_source(64, 48, 5, 0.0, 1).unwrap();
        assert_eq!(drain(&mut s).len(), 5);
        assert!(s.next_frame().unwrap().is_none());
        assert!(synthetic_source(64, 48, 0, 0.0, 1).is_err());
    }

    #[test]
    fn synthetic_is_seed_deterministic() {
        let a = drain(&mut synthetic_source(96, 80, 4, 0.0, 9).unwrap());
        let b = drain(&mut synthetic_source(96, 80, 4, 0.0, 9).unwrap());
        let c = drain(&mut synthetic_source(96, 80, 4, 0.0, 10).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sidecar_box_contains_bright_center() {
        let mut s = synthetic_source(200, 150, 50, 0.0, 3).unwrap();
        let frames = drain(&mut s);
        for (f, b) in frames.iter().zip(s.truth()) {
            let (cx, cy) = ((b.x1 + b.x2) / 2.0, (b.y1 + b.y2) / 2.0);
            let (i, j) = (cx.floor() as u32, cy.floor() as u32);
            assert!(b.x1 <= i as f64 + 0.5 && i as f64 + 0.5 <= b.x2);
            assert!(b.y1 <= j as f64 + 0.5 && j as f64 + 0.5 <= b.y2);
            assert!(f.pixel(i, j)[0] >= 200, "center pixel is inside the ellipse");
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("truth.jsonl");
        s.write_sidecar(&p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 50);
    }

    #[test]
    fn image_dir_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        for (k, name) in ["b.png", "a.png", "c.png"].iter().enumerate() {
            Frame::filled(8, 8, 1, k as u8 * 10).save_png(&dir.path().join(name)).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "x").unwrap();
        let mut s = image_dir_source(dir.path(), 0.0).unwrap();
        assert_eq!(s.len_hint(), Some(3));
        let v: Vec<u8> = drain(&mut s).iter().map(|f| f.data()[0]).collect();
        assert_eq!(v, vec![10, 0, 20]);
        assert!(image_dir_source(&dir.path().join("missing"), 0.0).is_err());
    }

    #[test]
    fn y4m_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("v.y4m");
        let frames = drain(&mut synthetic_source(40, 30, 3, 0.0, 5).unwrap());
        write_y4m(&p, &frames, 25).unwrap();
        let mut s = y4m_source(&p, true).unwrap();
        assert_eq!((s.len_hint(), s.nominal_fps(), s.dimensions()), (Some(3), 25.0, (40, 30)));
        assert_eq!(drain(&mut s), frames);
        assert_eq!(y4m_source(&p, false).unwrap().nominal_fps(), 0.0);
    }

    #[test]
    fn y4m_420_reads_luma() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.y4m");
        let mut bytes = b"YUV4MPEG2 W4 H2 F30000:1001 C420jpeg\nFRAME\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3, 4, 5, 6, 7, 8, 128, 128, 128, 128]);
        fs::write(&p, &bytes).unwrap();
        let mut s = y4m_source(&p, true).unwrap();
        assert!((s.nominal_fps() - 29.97).abs() < 0.01);
        assert_eq!(s.next_frame().unwrap().unwrap().data(), &[1, 2, 3, 4, 5, 6, 7, 8]);
        assert!(s.next_frame().unwrap().is_none());

        bytes.truncate(bytes.len() - 3);
        fs::write(&p, &bytes).unwrap();
        assert!(y4m_source(&p, false).unwrap().next_frame().is_err());
        fs::write(&p, b"RIFF").unwrap();
        assert!(y4m_source(&p, false).is_err());
    }

    #[test]
    fn capture_is_unsupported() {
        assert!(matches!(capture_source("/dev/video0"), Err(Error::Source(_))));
    }
}
