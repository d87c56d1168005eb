//! Three-stage frame pipeline (capture, compute, render) joined by bounded
//! queues, plus a single-threaded variant for deterministic runs.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::queue::{BoundedQueue, Overflow, Push};
use super::report::{summarize, BenchReport};
use super::sink::{FrameSink, NullSink};
use super::source::FrameSource;
use crate::datakit::Frame;
use crate::engine::{Engine, InferenceBackend, ModelCost};
use crate::error::{Error, Result};
use crate::geometry::Detection;

/// Minimum number of measured frames a benchmark needs.
pub const MIN_BENCH_FRAMES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelinePolicy {
    pub queue_capacity: usize,
    pub overflow: Overflow,
    /// Completed frames excluded from the statistics.
    pub warmup_frames: usize,
}

impl Default for PipelinePolicy {
    fn default() -> Self {
        Self {
            queue_capacity: 1,
            overflow: Overflow::DropOldest,
            warmup_frames: 10,
        }
    }
}

impl PipelinePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.queue_capacity == 0 {
            return Err(Error::InvalidInput("queue_capacity must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-frame timings in microseconds. `t_capture` and `t_done` are offsets
/// from the start of the run; the other fields are stage durations.
/// `latency` runs from capture to delivery at the render stage. Dropped
/// frames carry only `t_capture`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimingRecord {
    pub frame_id: u64,
    pub t_capture: u64,
    pub t_pre: Option<u64>,
    pub t_infer: Option<u64>,
    pub t_post: Option<u64>,
    pub t_render: Option<u64>,
    pub latency: Option<u64>,
    pub t_done: Option<u64>,
    pub dropped: bool,
}

impl TimingRecord {
    fn dropped(frame_id: u64, t_capture: Duration) -> Self {
        Self {
            frame_id,
            t_capture: us(t_capture),
            dropped: true,
            ..Default::default()
        }
    }
}

fn us(d: Duration) -> u64 {
    d.as_micros() as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Collect per-stage timings. Frame counts and wall time are always
    /// recorded.
    pub instrument: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { instrument: true }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: BenchReport,
    /// One record per emitted frame, ordered by `frame_id`.
    pub records: Vec<TimingRecord>,
    /// Largest gap, in frames, between what the compute and render stages
    /// picked up and the newest frame their upstream stage had produced.
    pub max_staleness: [u64; 2],
}

struct Captured {
    id: u64,
    frame: Frame,
    t_cap: Duration,
}

struct Computed {
    id: u64,
    frame: Frame,
    t_cap: Duration,
    dets: Vec<Detection>,
    stages: Option<[Duration; 3]>,
}

struct Shared {
    start: Instant,
    abort: AtomicBool,
    error: Mutex<Option<String>>,
    dropped: Mutex<Vec<TimingRecord>>,
    newest_captured: AtomicU64,
    newest_computed: AtomicU64,
    staleness: [AtomicU64; 2],
}

impl Shared {
    fn fail(&self, e: Error) {
        let mut slot = self.error.lock().expect("error lock");
        if slot.is_none() {
            *slot = Some(e.to_string());
        }
        self.abort.store(true, Ordering::SeqCst);
    }

    fn drop_frame(&self, id: u64, t_cap: Duration) {
        self.dropped.lock().expect("drop lock").push(TimingRecord::dropped(id, t_cap));
    }

    fn note_staleness(&self, stage: usize, newest: &AtomicU64, id: u64) {
        let gap = newest.load(Ordering::SeqCst).saturating_sub(id);
        self.staleness[stage].fetch_max(gap, Ordering::SeqCst);
    }
}

struct Pacer {
    start: Instant,
    fps: f64,
}

impl Pacer {
    fn new(start: Instant, fps: f64) -> Self {
        Self {
            start,
            fps,
        }
    }

    fn wait(&self, k: u64) {
        if self.fps > 0.0 {
            let target = self.start + Duration::from_secs_f64(k as f64 / self.fps);
            let now = Instant::now();
            if target > now {
                thread::sleep(target - now);
            }
        }
    }
}

fn compute<B: InferenceBackend>(engine: &mut Engine<B>, frame: &Frame, instrument: bool) -> Result<(Vec<Detection>, Option<[Duration; 3]>)> {
    if instrument {
        let (d, t) = engine.detect_timed(frame)?;
        Ok((d, Some([t.preprocess, t.inference, t.postprocess])))
    } else {
        Ok((engine.detect(frame)?, None))
    }
}

fn deliver(sinks: &mut [&mut dyn FrameSink], id: u64, frame: &Frame, dets: &[Detection]) -> Result<()> {
    for s in sinks.iter_mut() {
        s.deliver(id, frame, dets)?;
    }
    Ok(())
}

fn completed(c: &Computed, delivered: Duration, done: Duration, instrument: bool) -> TimingRecord {
    let st = c.stages;
    TimingRecord {
        frame_id: c.id,
        t_capture: us(c.t_cap),
        t_pre: st.map(|s| us(s[0])),
        t_infer: st.map(|s| us(s[1])),
        t_post: st.map(|s| us(s[2])),
        t_render: instrument.then(|| us(done.saturating_sub(delivered))),
        latency: instrument.then(|| us(delivered.saturating_sub(c.t_cap))),
        t_done: Some(us(done)),
        dropped: false,
    }
}

/// Runs capture, compute and render on one thread each. Never fails after
/// the policy check: a source, backend or sink error stops the run and is
/// reported through `report.aborted` / `report.error`.
pub fn run_pipeline<B: InferenceBackend>(
    source: &mut dyn FrameSource,
    engine: &mut Engine<B>,
    policy: &PipelinePolicy,
    sinks: &mut [&mut dyn FrameSink],
    opts: &RunOptions,
) -> Result<PipelineRun> {
    policy.validate()?;
    let q1: BoundedQueue<Captured> = BoundedQueue::new(policy.queue_capacity, policy.overflow);
    let q2: BoundedQueue<Computed> = BoundedQueue::new(policy.queue_capacity, policy.overflow);
    let shared = Shared {
        start: Instant::now(),
        abort: AtomicBool::new(false),
        error: Mutex::new(None),
        dropped: Mutex::new(Vec::new()),
        newest_captured: AtomicU64::new(0),
        newest_computed: AtomicU64::new(0),
        staleness: [AtomicU64::new(0), AtomicU64::new(0)],
    };
    let instrument = opts.instrument;
    let fps = source.nominal_fps();
    let backend_name = engine.backend().name().to_string();
    let input_size = engine.config().input_size;
    let kind = source.kind();

    let (emitted, done) = thread::scope(|s| {
        let (sh, q1r, q2r) = (&shared, &q1, &q2);
        let sinks_r = &mut *sinks;
        let capture = s.spawn(move || {
            let pacer = Pacer::new(sh.start, fps);
            let mut id = 0u64;
            while !sh.abort.load(Ordering::SeqCst) {
                pacer.wait(id);
                let frame = match source.next_frame() {
                    Ok(Some(f)) => f,
                    Ok(None) => break,
                    Err(e) => {
                        sh.fail(e);
                        break;
                    }
                };
                let t_cap = sh.start.elapsed();
                sh.newest_captured.store(id, Ordering::SeqCst);
                match q1r.push(Captured { id, frame, t_cap }) {
                    Push::Accepted => {}
                    Push::Evicted(old) | Push::Closed(old) => sh.drop_frame(old.id, old.t_cap),
                }
                id += 1;
            }
            q1r.close();
            id
        });
        let compute_stage = s.spawn(move || {
            while let Some(c) = q1r.pop() {
                if sh.abort.load(Ordering::SeqCst) {
                    sh.drop_frame(c.id, c.t_cap);
                    continue;
                }
                sh.note_staleness(0, &sh.newest_captured, c.id);
                match compute(engine, &c.frame, instrument) {
                    Ok((dets, stages)) => {
                        sh.newest_computed.store(c.id, Ordering::SeqCst);
                        let item = Computed {
                            id: c.id,
                            frame: c.frame,
                            t_cap: c.t_cap,
                            dets,
                            stages,
                        };
                        match q2r.push(item) {
                            Push::Accepted => {}
                            Push::Evicted(old) | Push::Closed(old) => sh.drop_frame(old.id, old.t_cap),
                        }
                    }
                    Err(e) => {
                        sh.fail(e);
                        sh.drop_frame(c.id, c.t_cap);
                        for rest in q1r.close_and_drain() {
                            sh.drop_frame(rest.id, rest.t_cap);
                        }
                    }
                }
            }
            q2r.close();
        });
        let render = s.spawn(move || {
            let mut done = Vec::new();
            let mut sink_failed = false;
            while let Some(c) = q2r.pop() {
                if sink_failed {
                    sh.drop_frame(c.id, c.t_cap);
                    continue;
                }
                sh.note_staleness(1, &sh.newest_computed, c.id);
                let delivered = sh.start.elapsed();
                match deliver(sinks_r, c.id, &c.frame, &c.dets) {
                    Ok(()) => done.push(completed(&c, delivered, sh.start.elapsed(), instrument)),
                    Err(e) => {
                        sh.fail(e);
                        sink_failed = true;
                        sh.drop_frame(c.id, c.t_cap);
                        for rest in q1r.close_and_drain() {
                            sh.drop_frame(rest.id, rest.t_cap);
                        }
                    }
                }
            }
            done
        });
        let emitted = capture.join().expect("capture stage panicked");
        compute_stage.join().expect("compute stage panicked");
        let done = render.join().expect("render stage panicked");
        (emitted, done)
    });

    let total = shared.start.elapsed();
    let dropped = shared.dropped.into_inner().expect("drop lock");
    let error = shared.error.into_inner().expect("error lock");
    for s in sinks.iter_mut() {
        s.finish()?;
    }
    let report = summarize(&done, dropped.len(), emitted, policy.warmup_frames, total, error)
        .with_context(backend_name, kind, input_size);
    let mut records = done;
    records.extend(dropped);
    records.sort_by_key(|r| r.frame_id);
    Ok(PipelineRun {
        report,
        records,
        max_staleness: [
            shared.staleness[0].load(Ordering::SeqCst),
            shared.staleness[1].load(Ordering::SeqCst),
        ],
    })
}

/// The same stages called in sequence on the calling thread. No frame is
/// ever dropped.
pub fn run_sequential<B: InferenceBackend>(
    source: &mut dyn FrameSource,
    engine: &mut Engine<B>,
    policy: &PipelinePolicy,
    sinks: &mut [&mut dyn FrameSink],
    opts: &RunOptions,
) -> Result<PipelineRun> {
    policy.validate()?;
    let start = Instant::now();
    let pacer = Pacer::new(start, source.nominal_fps());
    let mut done = Vec::new();
    let mut error = None;
    let mut id = 0u64;
    loop {
        pacer.wait(id);
        let frame = match source.next_frame() {
            Ok(Some(f)) => f,
            Ok(None) => break,
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        };
        let t_cap = start.elapsed();
        let step = compute(engine, &frame, opts.instrument).and_then(|(dets, stages)| {
            let delivered = start.elapsed();
            deliver(sinks, id, &frame, &dets)?;
            let c = Computed {
                id,
                frame,
                t_cap,
                dets,
                stages,
            };
            Ok(completed(&c, delivered, start.elapsed(), opts.instrument))
        });
        id += 1;
        match step {
            Ok(r) => done.push(r),
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let total = start.elapsed();
    for s in sinks.iter_mut() {
        s.finish()?;
    }
    let dropped = id as usize - done.len();
    let mut records = done.clone();
    if dropped > 0 {
        // the frame that failed
        records.push(TimingRecord::dropped(id - 1, Duration::ZERO));
    }
    let report = summarize(&done, dropped, id, policy.warmup_frames, total, error).with_context(
        engine.backend().name().to_string(),
        source.kind(),
        engine.config().input_size,
    );
    Ok(PipelineRun {
        report,
        records,
        max_staleness: [0, 0],
    })
}

/// Throughput benchmark: the threaded pipeline with a null sink.
pub fn bench<B: InferenceBackend>(
    engine: &mut Engine<B>,
    source: &mut dyn FrameSource,
    policy: &PipelinePolicy,
    cost: Option<ModelCost>,
) -> Result<BenchReport> {
    bench_run(engine, source, policy, cost).map(|r| r.report)
}

/// [`bench`] keeping the per-frame records.
pub fn bench_run<B: InferenceBackend>(
    engine: &mut Engine<B>,
    source: &mut dyn FrameSource,
    policy: &PipelinePolicy,
    cost: Option<ModelCost>,
) -> Result<PipelineRun> {
    let needed = policy.warmup_frames + MIN_BENCH_FRAMES;
    if let Some(n) = source.len_hint() {
        if n < needed {
            return Err(Error::InsufficientFrames { needed, available: n });
        }
    }
    let mut sink = NullSink;
    let mut run = run_pipeline(source, engine, policy, &mut [&mut sink], &RunOptions::default())?;
    run.report.model_cost = cost;
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::synth::synthetic_head;
    use crate::engine::{DecodeConfig, ReplayBackend, ReplayEntry, ReplayFixture, ReplayMode, ScaleInfo};
    use crate::rtharness::sink::{CollectSink, DelaySink};
    use crate::rtharness::source::synthetic_source;
    use crate::tensor::RawTensor;

    fn zero_engine(s: u32) -> Engine<ReplayBackend> {
        let b = ReplayBackend::new(ReplayFixture {
            mode: ReplayMode::Cycle,
            input_shape: vec![1, 3, s as usize, s as usize],
            entries: vec![ReplayEntry {
                input_checksum: None,
                outputs: vec![RawTensor::zeros(vec![1, 5, 64])],
            }],
        })
        .unwrap();
        Engine::new(b, DecodeConfig { input_size: s, ..Default::default() }).unwrap()
    }

    struct FailAfter {
        inner: ReplayBackend,
        left: usize,
    }

    impl InferenceBackend for FailAfter {
        fn name(&self) -> &str {
            "fail-after"
        }
        fn input_shape(&self) -> &[usize] {
            self.inner.input_shape()
        }
        fn infer(&mut self, input: &RawTensor) -> Result<Vec<RawTensor>> {
            if self.left == 0 {
                return Err(Error::Backend("device lost".into()));
            }
            self.left -= 1;
            self.inner.infer(input)
        }
    }

    #[test]
    fn conservation_unpaced() {
        let mut src = synthetic_source(64, 64, 100, 0.0, 1).unwrap();
        let mut e = zero_engine(64);
        let run = run_pipeline(&mut src, &mut e, &PipelinePolicy::default(), &mut [], &RunOptions::default()).unwrap();
        let r = &run.report;
        assert_eq!(r.frames_emitted, 100);
        assert_eq!(r.frames_processed + r.frames_dropped, 100);
        assert_eq!(run.records.len(), 100);
        assert!(run.records.iter().enumerate().all(|(k, t)| t.frame_id == k as u64));
        assert!(!r.aborted);
    }

    #[test]
    fn block_never_drops_and_delivers_in_order() {
        let mut src = synthetic_source(48, 48, 60, 0.0, 2).unwrap();
        let mut e = zero_engine(32);
        let mut sink = CollectSink::default();
        let policy = PipelinePolicy {
            overflow: Overflow::Block,
            ..Default::default()
        };
        let run = run_pipeline(&mut src, &mut e, &policy, &mut [&mut sink], &RunOptions::default()).unwrap();
        assert_eq!(run.report.frames_dropped, 0);
        assert_eq!(run.report.frames_processed, 60);
        let ids: Vec<u64> = sink.frames.iter().map(|(i, _)| *i).collect();
        assert_eq!(ids, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn dropped_records_carry_only_capture_time() {
        let mut src = synthetic_source(32, 32, 40, 0.0, 3).unwrap();
        let mut e = zero_engine(32);
        let mut slow = DelaySink::new(Duration::from_millis(3));
        let run = run_pipeline(&mut src, &mut e, &PipelinePolicy::default(), &mut [&mut slow], &RunOptions::default()).unwrap();
        assert!(run.report.frames_dropped > 0);
        for r in &run.records {
            if r.dropped {
                assert!(r.t_pre.is_none() && r.t_infer.is_none() && r.t_render.is_none() && r.latency.is_none());
            } else {
                assert!(r.t_render.unwrap() >= 3000);
            }
        }
        let caps: Vec<u64> = run.records.iter().map(|r| r.t_capture).collect();
        assert!(caps.windows(2).all(|w| w[0] <= w[1]), "capture time non-decreasing in frame order");
        assert!(run.max_staleness.iter().all(|&g| g <= 1));
    }

    #[test]
    fn backend_failure_aborts_with_partial_report() {
        let mut src = synthetic_source(32, 32, 50, 0.0, 4).unwrap();
        let inner = zero_engine(32).into_backend();
        let mut e = Engine::new(FailAfter { inner, left: 5 }, DecodeConfig { input_size: 32, ..Default::default() }).unwrap();
        let policy = PipelinePolicy {
            overflow: Overflow::Block,
            warmup_frames: 0,
            ..Default::default()
        };
        let run = run_pipeline(&mut src, &mut e, &policy, &mut [], &RunOptions::default()).unwrap();
        let r = &run.report;
        assert!(r.aborted);
        assert!(r.error.as_deref().unwrap().contains("device lost"));
        assert_eq!(r.frames_processed, 5);
        assert_eq!(r.frames_processed + r.frames_dropped, r.frames_emitted);
    }

    #[test]
    fn sequential_matches_source_and_detects() {
        let mut src = synthetic_source(320, 240, 12, 0.0, 5).unwrap();
        let s = ScaleInfo::new(320, 240, 64).unwrap();
        let head = synthetic_head(&[Detection::new(crate::geometry::BBox::new(10.0, 10.0, 100.0, 90.0), 0.8, 0)], 1, 16, &s).unwrap();
        let b = ReplayBackend::new(ReplayFixture {
            mode: ReplayMode::Cycle,
            input_shape: vec![1, 3, 64, 64],
            entries: vec![ReplayEntry {
                input_checksum: None,
                outputs: vec![head],
            }],
        })
        .unwrap();
        let mut e = Engine::new(b, DecodeConfig { input_size: 64, ..Default::default() }).unwrap();
        let mut sink = CollectSink::default();
        let policy = PipelinePolicy {
            warmup_frames: 11,
            ..Default::default()
        };
        let run = run_sequential(&mut src, &mut e, &policy, &mut [&mut sink], &RunOptions::default()).unwrap();
        assert_eq!(run.report.frames_processed, 12);
        assert_eq!(run.report.frames_measured, 1);
        assert_eq!(sink.frames.len(), 12);
        assert!(sink.frames.iter().all(|(_, d)| d.len() == 1 && (d[0].bbox.x2 - 100.0).abs() <= 0.5));
    }

    #[test]
    fn bench_requires_enough_frames() {
        let mut src = synthetic_source(32, 32, 39, 0.0, 6).unwrap();
        let mut e = zero_engine(32);
        let r = bench(&mut e, &mut src, &PipelinePolicy::default(), None);
        assert!(matches!(r, Err(Error::InsufficientFrames { needed: 40, available: 39 })));
    }

    #[test]
    fn warmup_of_all_but_one_measures_one_frame() {
        let n = 45;
        let mut src = synthetic_source(32, 32, n, 0.0, 7).unwrap();
        let mut e = zero_engine(32);
        let policy = PipelinePolicy {
            overflow: Overflow::Block,
            warmup_frames: n - 1,
            ..Default::default()
        };
        let r = run_pipeline(&mut src, &mut e, &policy, &mut [], &RunOptions::default()).unwrap().report;
        assert_eq!(r.frames_measured, 1);
        assert!(r.fps_mean > 0.0);
    }

    #[test]
    fn zero_capacity_is_rejected() {
        let mut src = synthetic_source(32, 32, 1, 0.0, 8).unwrap();
        let mut e = zero_engine(32);
        let p = PipelinePolicy {
            queue_capacity: 0,
            ..Default::default()
        };
        assert!(run_pipeline(&mut src, &mut e, &p, &mut [], &RunOptions::default()).is_err());
    }
}
