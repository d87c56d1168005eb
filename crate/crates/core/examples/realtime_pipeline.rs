//! Paced synthetic video through the capture/compute/render pipeline with a
//! slow display, then an unpaced throughput benchmark.

use std::time::Duration;

use sonodet::engine::{DecodeConfig, Engine};
use sonodet::rtharness::{
    bench, format_bench_table, run_pipeline, synthetic_source, zero_work_backend, DelaySink, FrameSink, Overflow,
    PipelinePolicy, RunOptions,
};

fn main() -> sonodet::Result<()> {
    let mut engine = Engine::new(zero_work_backend(640, 8400), DecodeConfig::default())?;

    let mut live = synthetic_source(640, 480, 120, 60.0, 1)?;
    let mut display = DelaySink::new(Duration::from_millis(40));
    let run = run_pipeline(
        &mut live,
        &mut engine,
        &PipelinePolicy::default(),
        &mut [&mut display as &mut dyn FrameSink],
        &RunOptions::default(),
    )?;
    let r = &run.report;
    println!(
        "live: {} emitted, {} shown, {} dropped, p50 latency {:.1} ms, staleness {:?}",
        r.frames_emitted, r.frames_processed, r.frames_dropped, r.latency_ms.p50, run.max_staleness
    );

    let mut recorded = synthetic_source(640, 640, 300, 0.0, 2)?;
    let policy = PipelinePolicy {
        overflow: Overflow::Block,
        ..PipelinePolicy::default()
    };
    let report = bench(&mut engine, &mut recorded, &policy, None)?;
    print!("{}", format_bench_table(&report));
    Ok(())
}
