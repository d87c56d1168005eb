use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use sonodet::datakit::{
    augment_dataset, load_ground_truth, read_nifti, scan_flat, scan_layout, slice_axial, split_by_subject,
    AugmentSpec, DatasetEntry, SplitRatios, SubjectRule,
};
use sonodet::datakit::layout::materialize_split;
use sonodet::engine::{estimate_model_cost, onnx_backend, replay_backend, DecodeConfig, Device, Engine, InferenceBackend};
use sonodet::geometry::{Detection, Split};
use sonodet::metrics::{
    evaluate, format_eval_table, read_detections, write_detections, ApMode, ByImage, EvalOptions, OverlapKind,
};
use sonodet::rtharness::{
    bench_run, capture_source, format_bench_table, image_dir_source, run_pipeline, run_sequential,
    synthetic_source, y4m_source, zero_work_backend, CollectSink, FrameSink, FrameSource, OverlayDirSink,
    OverlayStyle, Overflow, PipelinePolicy, RunOptions,
};
use sonodet::{Error, Result};

#[derive(Parser, Serialize)]
#[command(name = "sonodet", version, about = "Ultrasound tumor detection toolkit")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, global = true, default_value = "json")]
    format: Format,
    /// Worker threads for data-parallel steps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every random choice (each command has a fixed default).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
enum Command {
    /// Slice a NIfTI volume into axial PNG frames.
    Slice(SliceArgs),
    /// Split a flat image/label set into train/valid/test by subject.
    Split(SplitArgs),
    /// Write augmented variants of the training split.
    Augment(AugmentArgs),
    /// Score detections against a labeled dataset.
    Eval(EvalArgs),
    /// Run detection over a frame source and save the detections.
    Infer(InferArgs),
    /// Measure pipeline throughput and latency.
    Bench(BenchArgs),
    /// Static parameter and MAC count of an ONNX graph.
    Cost(CostArgs),
}

#[derive(Args, Serialize)]
struct SliceArgs {
    /// Uncompressed `.nii` volume.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct SplitArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// train:valid:test, e.g. `70:10:20`.
    #[arg(long, default_value = "70:10:20")]
    ratios: SplitRatios,
    /// Treat every image as its own subject instead of using the stem prefix.
    #[arg(long)]
    per_image: bool,
}

#[derive(Args, Serialize)]
struct AugmentArgs {
    /// Split dataset root (`<root>/train/images`, ...).
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    multiplier: u32,
    /// JSON file overriding transform ranges; missing fields keep defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Copy images verbatim (no transforms).
    #[arg(long)]
    no_transforms: bool,
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ApModeArg {
    AllPoints,
    Interp101,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    /// Detections file (JSON lines).
    #[arg(long)]
    dets: PathBuf,
    /// Dataset root: either split (`<root>/test/images`) or flat (`<root>/images`).
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "box")]
    mode: OverlapKind,
    /// Split to score when the dataset is split; `all` scores every split.
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_enum, default_value = "all-points")]
    ap_mode: ApModeArg,
    /// Bootstrap resamples for confidence intervals (0 disables them).
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
#[group(skip)]
#[command(group(ArgGroup::new("backend").required(true).args(["model", "replay", "zero_work"])))]
struct BackendArgs {
    /// ONNX model (requires the `onnx` feature).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Replay fixture.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Backend that never detects anything.
    #[arg(long)]
    zero_work: bool,
    #[arg(long, default_value = "cpu")]
    device: Device,
}

#[derive(Args, Serialize)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["images", "video", "synthetic", "capture"])))]
struct SourceArgs {
    /// Directory of images, read in file-name order.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Y4M video file.
    #[arg(long)]
    video: Option<PathBuf>,
    /// Generated frames with one bright lesion each; the value is the frame count.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Live capture device.
    #[arg(long)]
    capture: Option<String>,
    /// Source pacing in frames per second (0: as fast as possible; video: file rate).
    #[arg(long)]
    fps: Option<f64>,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
}

#[derive(Args, Serialize)]
struct DecodeArgs {
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    #[arg(long, default_value_t = 0.7)]
    iou: f64,
    #[arg(long, default_value_t = 300)]
    max_det: usize,
    /// Network input size (default: taken from the backend, else 640).
    #[arg(long)]
    imgsz: Option<u32>,
}

#[derive(Args, Serialize)]
struct PolicyArgs {
    #[arg(long, default_value_t = 1)]
    queue: usize,
}

#[derive(Args, Serialize)]
struct InferArgs {
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    decode: DecodeArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    #[arg(long, default_value = "block")]
    overflow: Overflow,
    /// Run the stages on one thread.
    #[arg(long)]
    sequential: bool,
    /// Also write overlaid frames to `<out>/overlays`.
    #[arg(long)]
    overlays: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct BenchArgs {
    #[command(flatten)]
    backend: BackendArgs,
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    decode: DecodeArgs,
    #[command(flatten)]
    policy: PolicyArgs,
    /// `block` measures peak throughput; `drop-oldest` the live display path.
    #[arg(long, default_value = "block")]
    overflow: Overflow,
    #[arg(long, default_value_t = 10)]
    warmup: usize,
    /// Per-frame timings as CSV.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Fail when the measured frame rate is below this.
    #[arg(long)]
    min_fps: Option<f64>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CostArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SONODET_LOG", "info")).init();
    log::info!("config {}", serde_json::to_string(&cli).unwrap_or_default());
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Slice(a) => slice(cli, a),
        Command::Split(a) => split(cli, a),
        Command::Augment(a) => augment(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Infer(a) => infer(cli, a),
        Command::Bench(a) => bench(cli, a),
        Command::Cost(a) => cost(cli, a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => {
            if let Some(d) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(d).map_err(|e| Error::InvalidInput(format!("{}: {e}", d.display())))?;
            }
            fs::write(p, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))
        }
        None => {
            let mut s = std::io::stdout().lock();
            let _ = s.write_all(text.as_bytes());
            let _ = s.flush();
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn create_dir(d: &Path) -> Result<()> {
    fs::create_dir_all(d).map_err(|e| Error::InvalidInput(format!("{}: {e}", d.display())))
}

/// Volume stem with `_` replaced so slice names keep one subject delimiter.
fn volume_stem(p: &Path) -> String {
    let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let stem = name.strip_suffix(".nii").unwrap_or(&name);
    stem.replace('_', "-")
}

fn slice(cli: &Cli, a: &SliceArgs) -> Result<()> {
    let v = read_nifti(&a.input)?;
    let frames = slice_axial(&v);
    create_dir(&a.out)?;
    let stem = volume_stem(&a.input);
    let width = frames.len().saturating_sub(1).to_string().len().max(3);
    let mut files = Vec::with_capacity(frames.len());
    for (z, f) in frames.iter().enumerate() {
        let name = format!("{stem}_{z:0width$}.png");
        f.save_png(&a.out.join(&name))?;
        files.push(name);
    }
    #[derive(Serialize)]
    struct Report {
        input: PathBuf,
        dims: [usize; 3],
        frames: usize,
        files: Vec<String>,
    }
    let (x, y, z) = v.dims();
    let r = Report {
        input: a.input.clone(),
        dims: [x, y, z],
        frames: frames.len(),
        files,
    };
    let text = match cli.format {
        Format::Json => json(&r)?,
        Format::Table => format!("{} slices of {}x{} from {}\n", r.frames, x, y, a.input.display()),
    };
    emit(None, &text)
}

fn split(cli: &Cli, a: &SplitArgs) -> Result<()> {
    let rule = if a.per_image { SubjectRule::PerImage } else { SubjectRule::default() };
    let entries = scan_flat(&a.images, &a.labels, &rule)?;
    let records: Vec<_> = entries.iter().map(|e| e.record.clone()).collect();
    let plan = split_by_subject(&records, a.ratios, cli.seed.unwrap_or(0))?;
    materialize_split(&entries, &plan, &a.out)?;
    #[derive(Serialize)]
    struct Report {
        images: [usize; 3],
        subjects: [usize; 3],
        ratios: SplitRatios,
    }
    let r = Report {
        images: plan.image_counts(&records),
        subjects: plan.subject_counts(),
        ratios: a.ratios,
    };
    let plan_path = a.out.join("split.json");
    fs::write(&plan_path, json(&plan)?).map_err(|e| Error::InvalidInput(format!("{}: {e}", plan_path.display())))?;
    let text = match cli.format {
        Format::Json => json(&r)?,
        Format::Table => format!(
            "split   images  subjects\ntrain   {:>6}  {:>8}\nvalid   {:>6}  {:>8}\ntest    {:>6}  {:>8}\n",
            r.images[0], r.subjects[0], r.images[1], r.subjects[1], r.images[2], r.subjects[2]
        ),
    };
    emit(None, &text)
}

fn augment(cli: &Cli, a: &AugmentArgs) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    let mut spec = match (&a.spec, a.no_transforms) {
        (_, true) => AugmentSpec::disabled(a.multiplier, seed),
        (Some(p), false) => {
            let text = fs::read_to_string(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text)?
        }
        (None, false) => AugmentSpec::default(),
    };
    spec.multiplier = a.multiplier;
    spec.seed = seed;
    log::info!("augment spec {}", serde_json::to_string(&spec)?);
    let entries = scan_layout(&a.dataset, &SubjectRule::default())?;
    let manifest = augment_dataset(&entries, &spec, &a.out)?;
    #[derive(Serialize)]
    struct Report {
        source_images: usize,
        variants: usize,
        instances_in: usize,
        instances_out: usize,
    }
    let r = Report {
        source_images: manifest.iter().map(|m| &m.image_id).collect::<BTreeSet<_>>().len(),
        variants: manifest.len(),
        instances_in: manifest.iter().map(|m| m.instances_in).sum(),
        instances_out: manifest.iter().map(|m| m.instances_out).sum(),
    };
    let text = match cli.format {
        Format::Json => json(&r)?,
        Format::Table => format!("{} variants of {} images\n", r.variants, r.source_images),
    };
    emit(None, &text)
}

fn dataset_entries(root: &Path, split: &str) -> Result<(Vec<DatasetEntry>, Vec<DatasetEntry>)> {
    let rule = SubjectRule::default();
    if root.join("images").is_dir() {
        let all = scan_flat(&root.join("images"), &root.join("labels"), &rule)?;
        return Ok((all.clone(), all));
    }
    let all = scan_layout(root, &rule)?;
    let chosen = if split == "all" {
        all.clone()
    } else {
        let s: Split = split.parse()?;
        all.iter().filter(|e| e.record.split == s).cloned().collect()
    };
    if chosen.is_empty() {
        return Err(Error::InvalidInput(format!("no images in split `{split}`")));
    }
    Ok((all, chosen))
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let (all, chosen) = dataset_entries(&a.gt, &a.split)?;
    let gts = load_ground_truth(&chosen, a.mode == OverlapKind::Mask)?;
    let known: BTreeSet<&str> = all.iter().map(|e| e.record.image_id.as_str()).collect();
    let mut dets = read_detections(&a.dets)?;
    let before = dets.len();
    dets.retain(|id, _| !known.contains(id.as_str()) || gts.contains_key(id));
    if dets.len() < before {
        log::info!("eval: ignoring detections on {} images outside the split", before - dets.len());
    }
    let opts = EvalOptions {
        kind: a.mode,
        ap_mode: match a.ap_mode {
            ApModeArg::AllPoints => ApMode::AllPoints,
            ApModeArg::Interp101 => ApMode::Interp101,
        },
        bootstrap_resamples: a.bootstrap,
        seed: cli.seed.unwrap_or(EvalOptions::default().seed),
        ..EvalOptions::default()
    };
    let report = evaluate(&dets, &gts, &opts)?;
    let text = match cli.format {
        Format::Json => json(&report)?,
        Format::Table => format_eval_table(&report),
    };
    emit(a.out.as_deref(), &text)
}

fn make_engine(b: &BackendArgs, d: &DecodeArgs) -> Result<(Engine<Box<dyn InferenceBackend>>, Option<PathBuf>)> {
    let imgsz = d.imgsz.unwrap_or(640);
    let (backend, model): (Box<dyn InferenceBackend>, _) = if let Some(p) = &b.model {
        (onnx_backend(p, b.device, imgsz)?, Some(p.clone()))
    } else if let Some(p) = &b.replay {
        (Box::new(replay_backend(p)?), None)
    } else {
        let s = imgsz as usize;
        let anchors = (s / 8).pow(2) + (s / 16).pow(2) + (s / 32).pow(2);
        (Box::new(zero_work_backend(imgsz, anchors)), None)
    };
    let input_size = match (d.imgsz, backend.input_shape()) {
        (Some(s), _) => s,
        (None, [_, _, h, _]) => *h as u32,
        (None, _) => imgsz,
    };
    let cfg = DecodeConfig {
        conf_threshold: d.conf,
        nms_iou: d.iou,
        max_detections: d.max_det,
        input_size,
    };
    log::info!("decode {}", serde_json::to_string(&cfg)?);
    Ok((Engine::new(backend, cfg)?, model))
}

struct Source {
    inner: Box<dyn FrameSource>,
    names: Option<Vec<String>>,
    truth: Option<Vec<String>>,
}

fn make_source(s: &SourceArgs, seed: u64) -> Result<Source> {
    let fps = s.fps.unwrap_or(0.0);
    if let Some(dir) = &s.images {
        let src = image_dir_source(dir, fps)?;
        let names = src
            .paths()
            .iter()
            .map(|p| p.file_stem().map(|x| x.to_string_lossy().into_owned()).unwrap_or_default())
            .collect();
        return Ok(Source {
            inner: Box::new(src),
            names: Some(names),
            truth: None,
        });
    }
    if let Some(p) = &s.video {
        let realtime = s.fps.is_none_or(|f| f > 0.0);
        return Ok(Source {
            inner: Box::new(y4m_source(p, realtime)?),
            names: None,
            truth: None,
        });
    }
    if let Some(n) = s.synthetic {
        let src = synthetic_source(s.width, s.height, n, fps, seed)?;
        let truth = src
            .truth()
            .iter()
            .map(|b| serde_json::to_string(&[b.x1, b.y1, b.x2, b.y2]))
            .collect::<std::result::Result<_, _>>()?;
        return Ok(Source {
            inner: Box::new(src),
            names: None,
            truth: Some(truth),
        });
    }
    let dev = s.capture.as_deref().unwrap_or_default();
    Ok(Source {
        inner: capture_source(dev)?,
        names: None,
        truth: None,
    })
}

fn frame_name(names: &Option<Vec<String>>, id: u64) -> String {
    names
        .as_ref()
        .and_then(|n| n.get(id as usize).cloned())
        .unwrap_or_else(|| format!("frame_{id:06}"))
}

fn infer(cli: &Cli, a: &InferArgs) -> Result<()> {
    let (mut engine, _) = make_engine(&a.backend, &a.decode)?;
    let mut src = make_source(&a.source, cli.seed.unwrap_or(0))?;
    let policy = PipelinePolicy {
        queue_capacity: a.policy.queue,
        overflow: a.overflow,
        warmup_frames: 0,
    };
    create_dir(&a.out)?;
    let mut collect = CollectSink::default();
    let mut overlays = if a.overlays {
        Some(OverlayDirSink::new(&a.out.join("overlays"), OverlayStyle::default())?)
    } else {
        None
    };
    let mut sinks: Vec<&mut dyn FrameSink> = vec![&mut collect];
    if let Some(o) = overlays.as_mut() {
        sinks.push(o);
    }
    let opts = RunOptions::default();
    let run = if a.sequential {
        run_sequential(src.inner.as_mut(), &mut engine, &policy, &mut sinks, &opts)?
    } else {
        run_pipeline(src.inner.as_mut(), &mut engine, &policy, &mut sinks, &opts)?
    };
    drop(sinks);

    let mut dets: ByImage<Detection> = ByImage::new();
    for (id, d) in &collect.frames {
        dets.insert(frame_name(&src.names, *id), d.clone());
    }
    write_detections(&a.out.join("detections.jsonl"), &dets)?;
    if let Some(t) = &src.truth {
        let p = a.out.join("truth.jsonl");
        let mut text = String::new();
        for (k, b) in t.iter().enumerate() {
            text.push_str(&format!("{{\"image_id\":\"{}\",\"bbox\":{b}}}\n", frame_name(&None, k as u64)));
        }
        fs::write(&p, text).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
    }
    let report = run.report;
    let text = match cli.format {
        Format::Json => json(&report)?,
        Format::Table => format_bench_table(&report),
    };
    emit(None, &text)?;
    match report.error {
        Some(e) => Err(Error::Backend(format!("run aborted: {e}"))),
        None => Ok(()),
    }
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let (mut engine, model) = make_engine(&a.backend, &a.decode)?;
    let cost = match &model {
        Some(p) => Some(estimate_model_cost(p)?),
        None => None,
    };
    let mut src = make_source(&a.source, cli.seed.unwrap_or(0))?;
    let policy = PipelinePolicy {
        queue_capacity: a.policy.queue,
        overflow: a.overflow,
        warmup_frames: a.warmup,
    };
    let run = bench_run(&mut engine, src.inner.as_mut(), &policy, cost)?;
    if let Some(p) = &a.records {
        let mut w = csv::Writer::from_path(p).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
        for r in &run.records {
            w.serialize(r).map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
        }
        w.flush().map_err(|e| Error::InvalidInput(format!("{}: {e}", p.display())))?;
    }
    let report = run.report;
    let text = match cli.format {
        Format::Json => json(&report)?,
        Format::Table => format_bench_table(&report),
    };
    emit(a.out.as_deref(), &text)?;
    if let Some(e) = &report.error {
        return Err(Error::Backend(format!("run aborted: {e}")));
    }
    if let Some(floor) = a.min_fps {
        if report.fps_mean < floor {
            return Err(Error::InvalidInput(format!(
                "measured {:.2} fps is below the required {floor}",
                report.fps_mean
            )));
        }
    }
    Ok(())
}

fn cost(cli: &Cli, a: &CostArgs) -> Result<()> {
    let c = estimate_model_cost(&a.model)?;
    let text = match cli.format {
        Format::Json => json(&c)?,
        Format::Table => format!(
            "Size (MB)  Parameters (M)  FLOPS (G)  MADD (G)\n{:>9.2}  {:>14.3}  {:>9.3}  {:>8.3}\n",
            c.size_mb(),
            c.parameters_m(),
            c.flops_g(),
            c.macs_g()
        ),
    };
    emit(a.out.as_deref(), &text)
}
