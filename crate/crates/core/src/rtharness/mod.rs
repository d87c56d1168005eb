//! Real-time harness: frame sources, the staged capture/compute/render
//! pipeline, overlay rendering and throughput benchmarking.

mod overlay;
mod pipeline;
mod queue;
mod report;
mod sink;
mod source;

pub use overlay::{label_rect, outline_contains, overlay, score_label, OverlayStyle};
pub use pipeline::{
    bench, bench_run, run_pipeline, run_sequential, PipelinePolicy, PipelineRun, RunOptions, TimingRecord, MIN_BENCH_FRAMES,
};
pub use queue::{BoundedQueue, Overflow, Push};
pub use report::{format_bench_table, peak_memory_bytes, BenchReport, LatencySummary, StageBreakdown};
pub use sink::{overlay_file_name, CollectSink, DelaySink, FrameSink, NullSink, OverlayDirSink};
pub use source::{
    capture_source, image_dir_source, synthetic_source, write_y4m, y4m_source, Ellipse, FrameSource, ImageDirSource,
    SourceKind, SyntheticSource, Y4mSource,
};

use crate::engine::{ReplayBackend, ReplayEntry, ReplayFixture, ReplayMode};
use crate::tensor::RawTensor;

/// Replay backend that answers every frame with an all-zero detection head
/// (no detections), so a benchmark measures the harness and not a model.
pub fn zero_work_backend(input_size: u32, num_anchors: usize) -> ReplayBackend {
    let s = input_size as usize;
    ReplayBackend::new(ReplayFixture {
        mode: ReplayMode::Cycle,
        input_shape: vec![1, 3, s, s],
        entries: vec![ReplayEntry {
            input_checksum: None,
            outputs: vec![RawTensor::zeros(vec![1, 5, num_anchors.max(1)])],
        }],
    })
    .expect("one entry")
}

/// Frame rate a benchmark must reach, from `SONODET_FPS_FLOOR` (default 30).
pub fn fps_floor() -> f64 {
    std::env::var("SONODET_FPS_FLOOR")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|v: &f64| v.is_finite() && *v >= 0.0)
        .unwrap_or(30.0)
}
