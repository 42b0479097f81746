//! Argument parsing and dispatch for the `vq3d` executable.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use vq3d_core::evaluation::Space;
use vq3d_core::frames::Aggregation;
use vq3d_core::registration::Method;
use vq3d_core::synth::{CorruptionSpec, PipelineOptions};
use vq3d_core::FrameId;

use crate::config::{PipelineConfig, Threshold};
use crate::error::{write_file, Error, Result};
use crate::formats::{read_intrinsics, read_json, read_queries, read_results, to_json, PoseFile};
use crate::ops::{self, BenchSpec, FixtureSpec, RegisterInput};
use crate::report::{render_bench, render_summary, ReportFormat};

#[derive(Debug, Parser)]
#[command(name = "vq3d", version, about = "Visual-query 3D localization pipeline")]
pub struct Cli {
    /// Pipeline config file (TOML). Flags override its keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads. Output does not depend on this.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Write the SfM command plan for a clip as plan.sh and plan.json.
    PlanSfm(PlanSfmArgs),
    /// Register submap models to anchor poses.
    Register(RegisterArgs),
    /// Predict each query's 3D displacement.
    Localize(LocalizeArgs),
    /// Score results against queries.
    Evaluate(EvaluateArgs),
    /// Write a synthetic fixture with exact ground truth.
    Synth(SynthArgs),
    /// Run the synthetic pipeline over a corruption grid.
    SynthBench(SynthBenchArgs),
    /// Variance-of-Laplacian score of every PGM frame in a directory.
    BlurScores(BlurArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Script,
    Json,
}

#[derive(Debug, Args)]
pub struct PlanSfmArgs {
    pub clip_dir: PathBuf,
    /// Which plan form goes to stdout.
    #[arg(long, value_enum, default_value = "script")]
    pub emit: Emit,
    /// Directory for plan.sh and plan.json; defaults to the clip directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RegistrationFlags {
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Weight of rotation error, meters per radian.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub min_common: Option<usize>,
    /// Anchor reprojection-error threshold in pixels, or `none`.
    #[arg(long)]
    pub filter_threshold: Option<Threshold>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    PerFrameMin,
    LeastSquaresSim3,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AggregationArg {
    Last,
    Average,
    Median,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SpaceArg {
    World,
    QueryFrame,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Reconstruction model directories, one per submap.
    #[arg(required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub anchor: PathBuf,
    #[arg(long)]
    pub clip: Option<String>,
    /// Registered camera-to-world poses.
    #[arg(long, default_value = "registered_poses.json")]
    pub out: PathBuf,
    /// Registration report; defaults to registration_report.json beside --out.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Regex whose first group is the frame index in image names.
    #[arg(long)]
    pub frame_pattern: Option<String>,
    #[command(flatten)]
    pub flags: RegistrationFlags,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub poses: PathBuf,
    #[arg(long)]
    pub depth_dir: PathBuf,
    /// Intrinsics JSON, or a model directory with a single camera.
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long, default_value = "results.json")]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
}

#[derive(Debug, Args)]
pub struct ThresholdFlags {
    /// Success threshold on L2 error, meters.
    #[arg(long)]
    pub l2_max: Option<f64>,
    /// Success threshold on angular error, radians.
    #[arg(long)]
    pub angle_max: Option<f64>,
    #[arg(long, value_enum)]
    pub space: Option<SpaceArg>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
pub struct SceneFlags {
    #[arg(long, default_value_t = 80)]
    pub frames: usize,
    #[arg(long, default_value_t = 6)]
    pub objects: usize,
    /// Frames at which a new submap starts.
    #[arg(long, value_delimiter = ',')]
    pub cuts: Vec<FrameId>,
    /// Submap scale range `lo,hi`; `1,1` keeps submaps rigid.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0])]
    pub scale_range: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    pub anchor_stride: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub scene: SceneFlags,
    #[arg(long, default_value_t = 0.0)]
    pub center_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rotation_noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0.0)]
    pub depth_noise: f64,
    /// Also write grayscale PGM frames.
    #[arg(long)]
    pub pgm: bool,
}

#[derive(Debug, Args)]
pub struct SynthBenchArgs {
    /// First seed; defaults to the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[command(flatten)]
    pub scene: SceneFlags,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub dropout: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub center_noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub rotation_noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0])]
    pub depth_noise: Vec<f64>,
    /// Filter thresholds to sweep; defaults to the config value.
    #[arg(long, value_delimiter = ',')]
    pub filter_thresholds: Vec<Threshold>,
    #[arg(long, value_enum, default_value = "text")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub registration: RegistrationFlags,
    #[arg(long, value_enum)]
    pub aggregation: Option<AggregationArg>,
    #[command(flatten)]
    pub thresholds: ThresholdFlags,
}

#[derive(Debug, Args)]
pub struct BlurArgs {
    pub frames_dir: PathBuf,
    #[arg(long, default_value = "blur_scores.csv")]
    pub out: PathBuf,
    /// Selected window as JSON `{"start": .., "end": ..}` or `null`.
    #[arg(long)]
    pub window_out: Option<PathBuf>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub frame_pattern: Option<String>,
}

fn apply_registration_flags(cfg: &mut PipelineConfig, f: &RegistrationFlags) {
    if let Some(m) = f.method {
        cfg.registration.method = match m {
            MethodArg::PerFrameMin => Method::PerFrameMin,
            MethodArg::LeastSquaresSim3 => Method::LeastSquaresSim3,
        };
    }
    if let Some(l) = f.lambda {
        cfg.registration.lambda = l;
    }
    if f.min_common.is_some() {
        cfg.registration.min_common = f.min_common;
    }
    if let Some(t) = f.filter_threshold {
        cfg.registration.filter_threshold = t;
    }
}

fn apply_threshold_flags(cfg: &mut PipelineConfig, f: &ThresholdFlags) {
    if let Some(v) = f.l2_max {
        cfg.evaluation.l2_max = v;
    }
    if let Some(v) = f.angle_max {
        cfg.evaluation.angle_max = v;
    }
    if let Some(s) = f.space {
        cfg.evaluation.space = match s {
            SpaceArg::World => Space::World,
            SpaceArg::QueryFrame => Space::QueryFrame,
        };
    }
}

fn aggregation(a: AggregationArg) -> Aggregation {
    match a {
        AggregationArg::Last => Aggregation::Last,
        AggregationArg::Average => Aggregation::Average,
        AggregationArg::Median => Aggregation::Median,
    }
}

fn scale_range(v: &[f64]) -> Result<(f64, f64)> {
    match v {
        [lo, hi] if *lo > 0.0 && lo <= hi => Ok((*lo, *hi)),
        _ => Err(Error::Config(format!("--scale-range needs 0 < lo <= hi, got {v:?}"))),
    }
}

fn emit(out: &mut (dyn Write + Send), text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn default_report_path(out: &Path) -> PathBuf {
    out.parent().unwrap_or(Path::new("")).join("registration_report.json")
}

/// Loads the config, applies flag overrides and runs the verb on a pool of
/// `jobs` threads.
pub fn run(cli: Cli, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(j) = cli.jobs {
        cfg.jobs = j;
    }
    match &cli.verb {
        Verb::Register(a) => {
            apply_registration_flags(&mut cfg, &a.flags);
            if let Some(p) = &a.frame_pattern {
                cfg.registration.frame_pattern = p.clone();
            }
        }
        Verb::SynthBench(a) => {
            apply_registration_flags(&mut cfg, &a.registration);
            apply_threshold_flags(&mut cfg, &a.thresholds);
            if let Some(g) = a.aggregation {
                cfg.localization.aggregation = aggregation(g);
            }
        }
        Verb::Localize(a) => {
            if let Some(g) = a.aggregation {
                cfg.localization.aggregation = aggregation(g);
            }
        }
        Verb::Evaluate(a) => apply_threshold_flags(&mut cfg, &a.thresholds),
        Verb::BlurScores(a) => {
            if let Some(w) = a.window {
                cfg.blur.window = w;
            }
            if let Some(t) = a.threshold {
                cfg.blur.threshold = t;
            }
            if let Some(p) = &a.frame_pattern {
                cfg.registration.frame_pattern = p.clone();
            }
        }
        Verb::PlanSfm(_) | Verb::Synth(_) => {}
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.verb, &cfg, stdout, stderr))
}

fn dispatch(verb: &Verb, cfg: &PipelineConfig, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> Result<()> {
    match verb {
        Verb::PlanSfm(a) => {
            let plan = ops::plan_sfm(&a.clip_dir)?;
            let dir = a.out_dir.clone().unwrap_or_else(|| a.clip_dir.clone());
            write_file(&dir.join("plan.sh"), plan.script.as_bytes())?;
            write_file(&dir.join("plan.json"), plan.argv_json.as_bytes())?;
            emit(stdout, if a.emit == Emit::Json { &plan.argv_json } else { &plan.script })
        }
        Verb::Register(a) => {
            let pattern = cfg.frame_pattern()?;
            let out = ops::register(&RegisterInput {
                model_dirs: &a.models,
                anchor: &a.anchor,
                clip: a.clip.as_deref(),
                options: cfg.registration_options(),
                filter_threshold: cfg.registration.filter_threshold.0,
                pattern: &pattern,
            })?;
            write_file(&a.out, to_json(&out.poses).as_bytes())?;
            let report_path = a.report.clone().unwrap_or_else(|| default_report_path(&a.out));
            write_file(&report_path, to_json(&out.report).as_bytes())?;
            for s in out.report.submaps.iter().filter(|s| s.reason.is_some()) {
                let _ = writeln!(stderr, "warning: {} not registered: {}", s.label, s.reason.as_deref().unwrap_or(""));
            }
            let _ = writeln!(stderr, "{} frames posed from {} submaps", out.report.posed_frames, out.report.submaps.len());
            Ok(())
        }
        Verb::Localize(a) => {
            let queries = read_queries(&a.queries)?;
            let poses: PoseFile = read_json(&a.poses)?;
            let k = read_intrinsics(&a.intrinsics)?;
            let results = ops::localize(&queries, &poses, &a.depth_dir, &k, cfg.localization.aggregation)?;
            write_file(&a.out, to_json(&results).as_bytes())?;
            let posed = results.iter().filter(|r| r.has_pose).count();
            let _ = writeln!(stderr, "{posed}/{} queries posed", results.len());
            Ok(())
        }
        Verb::Evaluate(a) => {
            let results = read_results(&a.results)?;
            let queries = read_queries(&a.queries)?;
            let summary = ops::evaluate_results(&results, &queries, &cfg.thresholds())?;
            let text = render_summary(&summary, a.format);
            match &a.out {
                Some(p) => write_file(p, text.as_bytes()),
                None => emit(stdout, &text),
            }
        }
        Verb::Synth(a) => {
            let spec = FixtureSpec {
                seed: a.seed.unwrap_or(cfg.seed),
                frames: a.scene.frames,
                objects: a.scene.objects,
                corruption: CorruptionSpec {
                    center_noise_sigma: a.center_noise,
                    rotation_noise_sigma: a.rotation_noise,
                    submap_cuts: a.scene.cuts.clone(),
                    submap_transforms: Vec::new(),
                    pose_dropout: a.dropout,
                    depth_noise_sigma: a.depth_noise,
                    anchor_stride: a.scene.anchor_stride,
                },
                scale_range: scale_range(&a.scene.scale_range)?,
                pgm: a.pgm,
            };
            let truth = ops::write_fixture(&a.out, &spec)?;
            let _ = writeln!(stderr, "wrote {} ({} submaps)", truth.clip_id, truth.submaps.len());
            Ok(())
        }
        Verb::SynthBench(a) => {
            let first = a.seed.unwrap_or(cfg.seed);
            let filter = if a.filter_thresholds.is_empty() {
                vec![cfg.registration.filter_threshold.0]
            } else {
                a.filter_thresholds.iter().map(|t| t.0).collect()
            };
            let spec = BenchSpec {
                seeds: (first..first + a.seeds).collect(),
                frames: a.scene.frames,
                objects: a.scene.objects,
                submap_cuts: a.scene.cuts.clone(),
                scale_range: scale_range(&a.scene.scale_range)?,
                anchor_stride: a.scene.anchor_stride,
                dropout: a.dropout.clone(),
                center_noise: a.center_noise.clone(),
                rotation_noise: a.rotation_noise.clone(),
                depth_noise: a.depth_noise.clone(),
                filter_thresholds: filter,
                options: PipelineOptions {
                    registration: cfg.registration_options(),
                    filter_threshold: None,
                    aggregation: cfg.localization.aggregation,
                    thresholds: cfg.thresholds(),
                },
            };
            let report = ops::run_bench(&spec)?;
            let text = render_bench(&report, a.format);
            match &a.out {
                Some(p) => write_file(p, text.as_bytes()),
                None => emit(stdout, &text),
            }
        }
        Verb::BlurScores(a) => {
            let out = ops::blur_scores(&a.frames_dir, &cfg.frame_pattern()?, cfg.blur.window, cfg.blur.threshold)?;
            write_file(&a.out, out.csv().as_bytes())?;
            let window = out.window.map(|(start, end)| serde_json::json!({ "start": start, "end": end }));
            if let Some(p) = &a.window_out {
                write_file(p, to_json(&window).as_bytes())?;
            }
            match out.window {
                Some((s, e)) => writeln!(stderr, "sharp window: frames {s}..={e}"),
                None => writeln!(stderr, "no window of {} frames reaches {}", cfg.blur.window, cfg.blur.threshold),
            }
            .map_err(|e| Error::io(Path::new("<stderr>"), e))
        }
    }
}

/// Parses `args` and runs; returns the process exit code. Usage errors exit
/// 1, data errors 2.
pub fn main_with<I, T>(args: I, stdout: &mut (dyn Write + Send), stderr: &mut (dyn Write + Send)) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { stdout.write_all(rendered.as_bytes()) } else { stderr.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match run(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
