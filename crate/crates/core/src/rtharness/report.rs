use std::fmt::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::pipeline::TimingRecord;
use super::source::SourceKind;
use crate::engine::ModelCost;
use crate::metrics::{quantile_sorted, write_table};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl LatencySummary {
    /// Summary of millisecond samples; all zero when empty.
    pub fn from_ms(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut v = samples.to_vec();
        v.sort_by(f64::total_cmp);
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: quantile_sorted(&v, 0.50),
            p90: quantile_sorted(&v, 0.90),
            p99: quantile_sorted(&v, 0.99),
            max: *v.last().expect("non-empty"),
        }
    }
}

/// Mean stage durations in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageBreakdown {
    pub preprocess: f64,
    pub inference: f64,
    pub postprocess: f64,
    pub render: f64,
}

/// Aggregate of one pipeline run. Frame counts cover the whole run; every
/// timing statistic covers the measured frames only (completed frames after
/// the warmup). `wall_time_s` spans from the completion of the last warmup
/// frame (or the start of the run without warmup) to the completion of the
/// last frame, and `fps_mean = frames_measured / wall_time_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub backend: String,
    pub source: Option<SourceKind>,
    pub input_size: u32,
    pub frames_emitted: u64,
    pub frames_processed: u64,
    pub frames_dropped: u64,
    pub warmup_frames: u64,
    pub frames_measured: u64,
    pub wall_time_s: f64,
    pub total_time_s: f64,
    pub fps_mean: f64,
    /// Capture to delivery at the render stage.
    pub latency_ms: LatencySummary,
    /// Mean preprocess + inference + postprocess time per frame.
    pub processing_latency_s: f64,
    pub stage_mean_ms: StageBreakdown,
    pub peak_memory_bytes: u64,
    pub model_cost: Option<ModelCost>,
    pub aborted: bool,
    pub error: Option<String>,
}

impl BenchReport {
    pub(crate) fn with_context(mut self, backend: String, source: SourceKind, input_size: u32) -> Self {
        self.backend = backend;
        self.source = Some(source);
        self.input_size = input_size;
        self
    }
}

/// Peak resident set size of this process (`VmHWM`), where the platform
/// exposes it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn mean(v: impl Iterator<Item = u64>) -> f64 {
    let (mut s, mut n) = (0u128, 0u64);
    for x in v {
        s += x as u128;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        s as f64 / n as f64
    }
}

/// Builds the report from completed records in delivery order.
pub(crate) fn summarize(
    done: &[TimingRecord],
    dropped: usize,
    emitted: u64,
    warmup: usize,
    total: Duration,
    error: Option<String>,
) -> BenchReport {
    let measured = done.get(warmup..).unwrap_or(&[]);
    let window_start = match warmup {
        0 => 0,
        w => done.get(w - 1).and_then(|r| r.t_done).unwrap_or(0),
    };
    let window_end = measured.last().and_then(|r| r.t_done).unwrap_or(window_start);
    let wall_us = window_end.saturating_sub(window_start);
    let wall_time_s = wall_us as f64 / 1e6;
    let fps_mean = if measured.is_empty() || wall_us == 0 {
        0.0
    } else {
        measured.len() as f64 / wall_time_s
    };
    let lat: Vec<f64> = measured.iter().filter_map(|r| r.latency).map(|u| u as f64 / 1e3).collect();
    let ms = |f: fn(&TimingRecord) -> Option<u64>| mean(measured.iter().filter_map(f)) / 1e3;
    let stage = StageBreakdown {
        preprocess: ms(|r| r.t_pre),
        inference: ms(|r| r.t_infer),
        postprocess: ms(|r| r.t_post),
        render: ms(|r| r.t_render),
    };
    let proc_us = mean(
        measured
            .iter()
            .filter_map(|r| Some(r.t_pre? + r.t_infer? + r.t_post?)),
    );
    BenchReport {
        backend: String::new(),
        source: None,
        input_size: 0,
        frames_emitted: emitted,
        frames_processed: done.len() as u64,
        frames_dropped: dropped as u64,
        warmup_frames: warmup as u64,
        frames_measured: measured.len() as u64,
        wall_time_s,
        total_time_s: total.as_secs_f64(),
        fps_mean,
        latency_ms: LatencySummary::from_ms(&lat),
        processing_latency_s: proc_us / 1e6,
        stage_mean_ms: stage,
        peak_memory_bytes: peak_memory_bytes().unwrap_or(0),
        model_cost: None,
        aborted: error.is_some(),
        error,
    }
}

/// Benchmark table: size, memory, parameters, FLOPS, MADD, FPS and mean
/// latency, followed by latency percentiles and the stage breakdown.
pub fn format_bench_table(r: &BenchReport) -> String {
    let mb = |b: u64| format!("{:.2}", b as f64 / (1024.0 * 1024.0));
    let c = r.model_cost;
    let opt = |f: &dyn Fn(&ModelCost) -> String| c.as_ref().map(f).unwrap_or_else(|| "-".into());
    let header = [
        "Size (MB)",
        "Memory (MB)",
        "Parameters (M)",
        "FLOPS (G)",
        "MADD (G)",
        "FPS",
        "Latency (s)",
        "p50 (ms)",
        "p90 (ms)",
        "p99 (ms)",
    ];
    let row = vec![
        opt(&|c| mb(c.file_size_bytes)),
        mb(r.peak_memory_bytes),
        opt(&|c| format!("{:.2}", c.parameters_m())),
        opt(&|c| format!("{:.2}", c.flops_g())),
        opt(&|c| format!("{:.2}", c.macs_g())),
        format!("{:.2}", r.fps_mean),
        format!("{:.4}", r.processing_latency_s),
        format!("{:.2}", r.latency_ms.p50),
        format!("{:.2}", r.latency_ms.p90),
        format!("{:.2}", r.latency_ms.p99),
    ];
    let mut out = String::new();
    write_table(&mut out, &header, &[row]);
    let s = r.stage_mean_ms;
    let _ = writeln!(
        out,
        "\nbackend {}  input {}  frames emitted {}  processed {}  dropped {}  measured {} (warmup {})",
        r.backend, r.input_size, r.frames_emitted, r.frames_processed, r.frames_dropped, r.frames_measured, r.warmup_frames
    );
    let _ = writeln!(
        out,
        "stage means (ms): preprocess {:.3}  inference {:.3}  postprocess {:.3}  render {:.3}",
        s.preprocess, s.inference, s.postprocess, s.render
    );
    if c.is_some() {
        let _ = writeln!(out, "FLOPS = 2 x MADD; MADD counts conv and gemm/matmul only (lower bound)");
    }
    if let Some(e) = &r.error {
        let _ = writeln!(out, "ABORTED: {e}");
    }
    out
}
