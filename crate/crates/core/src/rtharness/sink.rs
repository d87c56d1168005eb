use std::fs;
use std::path::{Path, PathBuf};
use std::thread;
use std::time::Duration;

use super::overlay::{overlay, OverlayStyle};
use crate::datakit::Frame;
use crate::error::{Error, Result};
use crate::geometry::Detection;

/// Receives every frame that survives the pipeline, on the render thread.
pub trait FrameSink: Send {
    fn deliver(&mut self, frame_id: u64, frame: &Frame, dets: &[Detection]) -> Result<()>;

    fn finish(&mut self) -> Result<()> {
        Ok(())
    }
}

pub struct NullSink;

impl FrameSink for NullSink {
    fn deliver(&mut self, _: u64, _: &Frame, _: &[Detection]) -> Result<()> {
        Ok(())
    }
}

/// Keeps the detections of each delivered frame.
#[derive(Debug, Default)]
pub struct CollectSink {
    pub frames: Vec<(u64, Vec<Detection>)>,
}

impl FrameSink for CollectSink {
    fn deliver(&mut self, frame_id: u64, _: &Frame, dets: &[Detection]) -> Result<()> {
        self.frames.push((frame_id, dets.to_vec()));
        Ok(())
    }
}

/// Sleeps on every frame; stands in for a slow display.
pub struct DelaySink {
    delay: Duration,
}

impl DelaySink {
    pub fn new(delay: Duration) -> Self {
        Self { delay }
    }
}

impl FrameSink for DelaySink {
    fn deliver(&mut self, _: u64, _: &Frame, _: &[Detection]) -> Result<()> {
        thread::sleep(self.delay);
        Ok(())
    }
}

/// Writes overlaid frames as `frame_000000.png`, ... (lossless).
pub struct OverlayDirSink {
    dir: PathBuf,
    style: OverlayStyle,
    written: usize,
}

impl OverlayDirSink {
    pub fn new(dir: &Path, style: OverlayStyle) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            style,
            written: 0,
        })
    }

    pub fn written(&self) -> usize {
        self.written
    }
}

pub fn overlay_file_name(frame_id: u64) -> String {
    format!("frame_{frame_id:06}.png")
}

impl FrameSink for OverlayDirSink {
    fn deliver(&mut self, frame_id: u64, frame: &Frame, dets: &[Detection]) -> Result<()> {
        let out = overlay(frame, dets, &self.style);
        out.save_png(&self.dir.join(overlay_file_name(frame_id)))
            .map_err(|e| Error::Sink(e.to_string()))?;
        self.written += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BBox;

    #[test]
    fn overlay_dir_writes_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = OverlayDirSink::new(&dir.path().join("out"), OverlayStyle::default()).unwrap();
        let f = Frame::filled(40, 30, 1, 50);
        s.deliver(3, &f, &[Detection::new(BBox::new(5.0, 5.0, 30.0, 25.0), 0.9, 0)]).unwrap();
        let back = Frame::load(&dir.path().join("out").join("frame_000003.png")).unwrap();
        assert_eq!((back.width(), back.height(), back.channels()), (40, 30, 3));
        assert_eq!(s.written(), 1);
    }

    #[test]
    fn collect_keeps_order() {
        let mut s = CollectSink::default();
        let f = Frame::filled(4, 4, 1, 0);
        s.deliver(1, &f, &[]).unwrap();
        s.deliver(5, &f, &[]).unwrap();
        assert_eq!(s.frames.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1, 5]);
    }
}
