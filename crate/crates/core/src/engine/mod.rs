//! Model-facing inference: preprocessing, execution backends, head
//! decoding, NMS, instance masks and static model cost.

mod backend;
mod cost;
mod decode;
mod masks;
pub mod onnx_proto;
mod preprocess;
pub mod replay;
pub mod synth;

use std::time::{Duration, Instant};

pub use backend::{onnx_backend, validate_outputs, Device, InferenceBackend};
pub use cost::{estimate_cost_from_bytes, estimate_model_cost, ModelCost};
pub use decode::{
    decode_candidates, decode_detections, nms, nms_candidates, nms_indices, Candidate, DecodeConfig, HeadLayout,
};
pub use masks::{decode_masks, MASK_THRESHOLD};
pub use preprocess::{preprocess, ScaleInfo};
pub use replay::{replay_backend, Recorder, ReplayBackend, ReplayEntry, ReplayFixture, ReplayMode};

use crate::datakit::Frame;
use crate::error::{Error, Result};
use crate::geometry::Detection;
use crate::tensor::RawTensor;

/// Decoding, NMS and (for two outputs) mask assembly on raw backend outputs.
pub fn postprocess(outputs: &[RawTensor], cfg: &DecodeConfig, scales: &ScaleInfo) -> Result<Vec<Detection>> {
    let layout = validate_outputs(outputs, cfg.input_size)?;
    let cands = decode_candidates(&outputs[0], &layout, cfg, scales)?;
    let kept = nms_candidates(cands, cfg.nms_iou, cfg.max_detections);
    match outputs.get(1) {
        Some(protos) => decode_masks(protos, kept, scales),
        None => Ok(kept.into_iter().map(|c| c.detection).collect()),
    }
}

/// Wall-clock time of each stage for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub preprocess: Duration,
    pub inference: Duration,
    pub postprocess: Duration,
}

/// A backend bound to a decode configuration.
pub struct Engine<B> {
    backend: B,
    cfg: DecodeConfig,
}

impl<B: InferenceBackend> Engine<B> {
    pub fn new(backend: B, cfg: DecodeConfig) -> Result<Self> {
        cfg.validate()?;
        let expected = [1, 3, cfg.input_size as usize, cfg.input_size as usize];
        if backend.input_shape() != expected {
            return Err(Error::ShapeMismatch(format!(
                "backend `{}` expects {:?}, config implies {expected:?}",
                backend.name(),
                backend.input_shape()
            )));
        }
        Ok(Self { backend, cfg })
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.cfg
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    pub fn preprocess(&self, frame: &Frame) -> Result<(RawTensor, ScaleInfo)> {
        preprocess(frame, self.cfg.input_size)
    }

    pub fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>> {
        self.backend.infer(input)
    }

    pub fn postprocess(&self, outputs: &[RawTensor], scales: &ScaleInfo) -> Result<Vec<Detection>> {
        postprocess(outputs, &self.cfg, scales)
    }

    pub fn detect(&mut self, frame: &Frame) -> Result<Vec<Detection>> {
        self.detect_timed(frame).map(|(d, _)| d)
    }

    pub fn detect_timed(&mut self, frame: &Frame) -> Result<(Vec<Detection>, StageTimes)> {
        let t0 = Instant::now();
        let (input, scales) = self.preprocess(frame)?;
        let t1 = Instant::now();
        let outputs = self.infer(&input)?;
        let t2 = Instant::now();
        let dets = self.postprocess(&outputs, &scales)?;
        let t3 = Instant::now();
        Ok((
            dets,
            StageTimes {
                preprocess: t1 - t0,
                inference: t2 - t1,
                postprocess: t3 - t2,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BBox, BitMask};
    use crate::metrics::DetectionRecord;
    use proptest::prelude::*;

    fn replay_of(outputs: Vec<RawTensor>, s: usize, mode: ReplayMode) -> ReplayBackend {
        ReplayBackend::new(ReplayFixture {
            mode,
            input_shape: vec![1, 3, s, s],
            entries: vec![ReplayEntry {
                input_checksum: None,
                outputs,
            }],
        })
        .unwrap()
    }

    #[test]
    fn detection_pipeline_end_to_end() {
        let frame = Frame::filled(800, 600, 3, 90);
        let scales = ScaleInfo::new(800, 600, 640).unwrap();
        let truth = vec![
            Detection::new(BBox::new(100.0, 100.0, 300.0, 250.0), 0.9, 0),
            Detection::new(BBox::new(105.0, 102.0, 302.0, 251.0), 0.8, 0),
            Detection::new(BBox::new(500.0, 300.0, 700.0, 500.0), 0.6, 0),
            Detection::new(BBox::new(10.0, 10.0, 50.0, 50.0), 0.1, 0),
        ];
        let head = synth::synthetic_head(&truth, 1, 8400, &scales).unwrap();
        let mut engine = Engine::new(replay_of(vec![head], 640, ReplayMode::Cycle), DecodeConfig::default()).unwrap();
        let (dets, times) = engine.detect_timed(&frame).unwrap();
        assert_eq!(dets.len(), 2);
        assert!((dets[0].score - 0.9).abs() < 1e-6 && (dets[1].score - 0.6).abs() < 1e-6);
        for (d, t) in dets.iter().zip([&truth[0], &truth[2]]) {
            for (a, b) in [(d.bbox.x1, t.bbox.x1), (d.bbox.y1, t.bbox.y1), (d.bbox.x2, t.bbox.x2), (d.bbox.y2, t.bbox.y2)] {
                assert!((a - b).abs() <= 0.5, "{a} vs {b}");
            }
        }
        assert!(times.inference <= times.preprocess + times.inference + times.postprocess);
    }

    #[test]
    fn segmentation_pipeline_attaches_masks() {
        let scales = ScaleInfo::new(64, 64, 64).unwrap();
        let b = BBox::new(8.0, 8.0, 40.0, 32.0);
        let head = synth::synthetic_seg_head(&[Detection::new(b, 0.9, 0)], &[vec![1.0, 0.0]], 1, 2, 16, &scales).unwrap();
        let mut protos = RawTensor::zeros(vec![1, 2, 16, 16]);
        protos.data_mut()[..256].fill(10.0);
        let dets = postprocess(&[head, protos], &DecodeConfig { input_size: 64, ..Default::default() }, &scales).unwrap();
        assert_eq!(dets.len(), 1);
        assert_eq!(dets[0].mask.as_ref().unwrap(), &BitMask::from_box(&dets[0].bbox, 64, 64));
    }

    #[test]
    fn engine_rejects_mismatched_backend() {
        let b = replay_of(vec![RawTensor::zeros(vec![1, 5, 10])], 320, ReplayMode::Cycle);
        assert!(matches!(Engine::new(b, DecodeConfig::default()), Err(Error::ShapeMismatch(_))));
        let b = replay_of(vec![RawTensor::zeros(vec![1, 5, 10])], 640, ReplayMode::Cycle);
        let bad = DecodeConfig { conf_threshold: 1.0, ..Default::default() };
        assert!(Engine::new(b, bad).is_err());
    }

    #[test]
    fn contract_head_is_accepted() {
        let outs = [RawTensor::zeros(vec![1, 5, 8400])];
        let s = ScaleInfo::new(640, 640, 640).unwrap();
        assert!(postprocess(&outs, &DecodeConfig::default(), &s).unwrap().is_empty());
    }

    #[test]
    fn detections_are_deterministic() {
        let frame = Frame::filled(320, 240, 1, 10);
        let scales = ScaleInfo::new(320, 240, 640).unwrap();
        let d = [Detection::new(BBox::new(10.0, 20.0, 100.0, 200.0), 0.7, 0)];
        let head = synth::synthetic_head(&d, 1, 100, &scales).unwrap();
        let run = || {
            let mut e = Engine::new(replay_of(vec![head.clone()], 640, ReplayMode::Cycle), DecodeConfig::default()).unwrap();
            let dets = e.detect(&frame).unwrap();
            let recs: Vec<_> = dets.iter().map(|d| DetectionRecord::from_detection("f", d)).collect();
            serde_json::to_string(&recs).unwrap()
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn box_round_trip_within_half_pixel(
            w in 16u32..2000, h in 16u32..2000,
            fx in 0.0f64..0.8, fy in 0.0f64..0.8, fw in 0.05f64..0.2, fh in 0.05f64..0.2,
        ) {
            let s = ScaleInfo::new(w, h, 640).unwrap();
            let b = BBox::new(fx * w as f64, fy * h as f64, (fx + fw) * w as f64, (fy + fh) * h as f64);
            let head = synth::synthetic_head(&[Detection::new(b, 0.9, 0)], 1, 4, &s).unwrap();
            let d = decode_detections(&head, &DecodeConfig::default(), &s).unwrap();
            prop_assert_eq!(d.len(), 1);
            for (a, e) in [(d[0].bbox.x1, b.x1), (d[0].bbox.y1, b.y1), (d[0].bbox.x2, b.x2), (d[0].bbox.y2, b.y2)] {
                prop_assert!((a - e).abs() <= 0.5, "{} vs {}", a, e);
            }
        }
    }
}
