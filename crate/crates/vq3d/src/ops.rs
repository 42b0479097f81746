//! What each command-line verb does, as plain functions over paths and values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vq3d_core::colmap::emit_pipeline_plan;
use vq3d_core::evaluation::{evaluate, EvaluationSummary, MetricThresholds};
use vq3d_core::frames::{blur_score, select_sharp_window, Aggregation, FrameRange};
use vq3d_core::localization::{localize_query, QueryResult, VisualQuery};
use vq3d_core::registration::{
    apply_registration, filter_poses, merge_registered, register_submap, PoseSet, PoseSource, RegistrationOptions,
};
use vq3d_core::synth::{
    clip_id, corrupt_depths, fragment_and_corrupt, generate_scene, random_submap_transforms, render_gray_frames,
    render_observations, run_pipeline, submap_model, CorruptionSpec, PipelineOptions,
};
use vq3d_core::{FrameId, Intrinsics};

use crate::error::{read_file, write_file, Error, Result};
use crate::formats::{
    blur_scores_csv, clip_poses, decode_pgm, depth_path, encode_depth, encode_pgm, model_pose_set, pose_records, to_json,
    DepthDir, FramePattern, PoseFile,
};
use crate::model_io::{read_model, write_model_text};
use crate::report::{BenchReport, BenchRow, RegistrationFileReport, SubmapReport, TransformRecord};

// ---------------------------------------------------------------- plan-sfm

pub struct SfmPlanFiles {
    pub script: String,
    pub argv_json: String,
}

/// Shell script and JSON argv list for a clip directory, which must exist.
pub fn plan_sfm(clip_dir: &Path) -> Result<SfmPlanFiles> {
    if !clip_dir.is_dir() {
        return Err(Error::Data(format!("{}: not a directory", clip_dir.display())));
    }
    let plan = emit_pipeline_plan(&clip_dir.to_string_lossy());
    Ok(SfmPlanFiles { script: plan.to_shell_script(), argv_json: to_json(&plan.commands) })
}

// ---------------------------------------------------------------- register

pub struct RegisterInput<'a> {
    pub model_dirs: &'a [PathBuf],
    pub anchor: &'a Path,
    /// Needed only when the anchor file holds more than one clip.
    pub clip: Option<&'a str>,
    pub options: RegistrationOptions,
    pub filter_threshold: Option<f64>,
    pub pattern: &'a FramePattern,
}

pub struct RegisterOutput {
    pub poses: PoseFile,
    pub report: RegistrationFileReport,
}

pub fn pick_clip<'a>(file: &'a PoseFile, clip: Option<&'a str>) -> Result<&'a str> {
    match clip {
        Some(c) => Ok(c),
        None if file.len() == 1 => Ok(file.keys().next().expect("one clip")),
        None => Err(Error::Config(format!("anchor file holds {} clips; pass --clip", file.len()))),
    }
}

/// Registers every model to the anchor poses and merges the results. A submap
/// that cannot be registered is reported, not fatal.
pub fn register(input: &RegisterInput<'_>) -> Result<RegisterOutput> {
    let anchor_file: PoseFile = crate::formats::read_json(input.anchor)?;
    let clip = pick_clip(&anchor_file, input.clip)?.to_string();
    let (anchor, reproj) = clip_poses(&anchor_file, &clip, "world", PoseSource::WorldAnchor)?;
    let kept = filter_poses(&anchor, &reproj, input.filter_threshold);

    let submaps = input
        .model_dirs
        .par_iter()
        .map(|dir| {
            let model = read_model(dir)?;
            let mut set = model_pose_set(dir, &model, input.pattern)?;
            set.source = PoseSource::Reconstruction;
            Ok(set)
        })
        .collect::<Result<Vec<PoseSet>>>()?;
    let results: Vec<_> = submaps.par_iter().map(|s| register_submap(s, &kept, &input.options)).collect();

    let parts: Vec<(PoseSet, f64)> = submaps
        .iter()
        .zip(&results)
        .filter_map(|(s, r)| r.as_ref().ok().map(|r| (apply_registration(r, s, "world"), r.mean_error)))
        .collect();
    let merged = merge_registered("world", &parts);

    let report = RegistrationFileReport {
        clip_id: clip.clone(),
        method: input.options.method,
        lambda: input.options.lambda,
        filter_threshold: input.filter_threshold,
        anchor_frames: anchor.len(),
        anchor_frames_kept: kept.len(),
        posed_frames: merged.len(),
        submaps: submaps.iter().zip(&results).map(|(s, r)| SubmapReport::new(&s.system_label, s.len(), r)).collect(),
    };
    let mut poses = PoseFile::new();
    poses.insert(clip, pose_records(&merged, None));
    Ok(RegisterOutput { poses, report })
}

// ---------------------------------------------------------------- localize

pub fn localize(
    queries: &[VisualQuery],
    poses: &PoseFile,
    depth_dir: &Path,
    k: &Intrinsics,
    mode: Aggregation,
) -> Result<Vec<QueryResult>> {
    let mut sets = BTreeMap::new();
    let mut depths = BTreeMap::new();
    for q in queries {
        if !sets.contains_key(&q.clip_id) {
            let set = if poses.contains_key(&q.clip_id) {
                clip_poses(poses, &q.clip_id, "world", PoseSource::WorldAnchor)?.0
            } else {
                PoseSet::empty("world", PoseSource::WorldAnchor, vq3d_core::Direction::CameraToWorld)
            };
            sets.insert(q.clip_id.clone(), set);
            depths.insert(q.clip_id.clone(), DepthDir::new(depth_dir, &q.clip_id));
        }
    }
    queries
        .par_iter()
        .map(|q| {
            let dd = &depths[&q.clip_id];
            // Surface malformed depth files instead of treating them as missing.
            for tf in q.track.frames() {
                dd.load(tf.frame_id)?;
            }
            Ok(localize_query(q, &sets[&q.clip_id], dd, k, mode))
        })
        .collect()
}

pub fn evaluate_results(results: &[QueryResult], queries: &[VisualQuery], t: &MetricThresholds) -> Result<EvaluationSummary> {
    evaluate(results, queries, t).map_err(|e| Error::Data(e.to_string()))
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureSpec {
    pub seed: u64,
    pub frames: usize,
    pub objects: usize,
    pub corruption: CorruptionSpec,
    /// Scale range of the random submap-to-world similarities; `(1, 1)` is rigid.
    pub scale_range: (f64, f64),
    /// Also write grayscale frames for blur scoring.
    pub pgm: bool,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self { seed: 0, frames: 80, objects: 6, corruption: CorruptionSpec::default(), scale_range: (1.0, 1.0), pgm: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureSubmap {
    pub label: String,
    /// Submap-to-world transform the fixture was built with.
    pub transform: TransformRecord,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureTruth {
    pub seed: u64,
    pub clip_id: String,
    pub submaps: Vec<FixtureSubmap>,
    pub dropped: Vec<FrameId>,
}

/// Layout written by [`write_fixture`], relative to its output directory.
pub mod layout {
    pub const MODELS: &str = "models";
    pub const ANCHOR: &str = "anchor.json";
    pub const QUERIES: &str = "queries.json";
    pub const DEPTH: &str = "depth";
    pub const INTRINSICS: &str = "intrinsics.json";
    pub const TRUTH: &str = "truth.json";
    pub const FRAMES: &str = "frames";
}

/// Scene, submap models, anchor poses, queries and depth grids for one seed.
pub fn write_fixture(out: &Path, spec: &FixtureSpec) -> Result<FixtureTruth> {
    let domain = |e: vq3d_core::synth::SynthError| Error::Config(e.to_string());
    let scene = generate_scene(spec.seed, spec.frames, spec.objects).map_err(domain)?;
    let mut corruption = spec.corruption.clone();
    if corruption.submap_transforms.is_empty() {
        corruption.submap_transforms = random_submap_transforms(spec.seed, corruption.n_submaps(), spec.scale_range);
    }
    let frags = fragment_and_corrupt(&scene, &corruption).map_err(domain)?;
    let mut obs = render_observations(&scene);
    corrupt_depths(&mut obs, corruption.depth_noise_sigma, spec.seed).map_err(domain)?;
    let clip = clip_id(spec.seed);

    let mut submaps = Vec::new();
    for (k, (set, truth)) in frags.submaps.iter().zip(&frags.truth).enumerate() {
        let label = format!("submap_{k}");
        write_model_text(&submap_model(&scene, set, truth), &out.join(layout::MODELS).join(&label))?;
        submaps.push(FixtureSubmap { label, transform: TransformRecord::from_transform(truth), frames: set.len() });
    }
    let mut anchor = PoseFile::new();
    anchor.insert(clip.clone(), pose_records(&frags.anchor, Some(&frags.anchor_reproj)));
    write_file(&out.join(layout::ANCHOR), to_json(&anchor).as_bytes())?;
    write_file(&out.join(layout::QUERIES), to_json(&obs.queries).as_bytes())?;
    write_file(&out.join(layout::INTRINSICS), to_json(&scene.intrinsics).as_bytes())?;
    for (&frame, grid) in &obs.depths {
        write_file(&depth_path(&out.join(layout::DEPTH), &clip, frame), &encode_depth(grid))?;
    }
    if spec.pgm {
        for (frame, img) in scene.trajectory.frames().zip(render_gray_frames(&scene)) {
            write_file(&out.join(layout::FRAMES).join(format!("frame_{frame:06}.pgm")), &encode_pgm(&img))?;
        }
    }
    let truth = FixtureTruth { seed: spec.seed, clip_id: clip, submaps, dropped: frags.dropped.iter().copied().collect() };
    write_file(&out.join(layout::TRUTH), to_json(&truth).as_bytes())?;
    Ok(truth)
}

// ---------------------------------------------------------------- synth-bench

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub seeds: Vec<u64>,
    pub frames: usize,
    pub objects: usize,
    pub submap_cuts: Vec<FrameId>,
    pub scale_range: (f64, f64),
    pub anchor_stride: usize,
    pub dropout: Vec<f64>,
    pub center_noise: Vec<f64>,
    pub rotation_noise: Vec<f64>,
    pub depth_noise: Vec<f64>,
    pub filter_thresholds: Vec<Option<f64>>,
    pub options: PipelineOptions,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            seeds: (0..10).collect(),
            frames: 80,
            objects: 6,
            submap_cuts: Vec::new(),
            scale_range: (1.0, 1.0),
            anchor_stride: 1,
            dropout: vec![0.0],
            center_noise: vec![0.0],
            rotation_noise: vec![0.0],
            depth_noise: vec![0.0],
            filter_thresholds: vec![None],
            options: PipelineOptions::default(),
        }
    }
}

struct Cell {
    dropout: f64,
    center: f64,
    rotation: f64,
    depth: f64,
    filter: Option<f64>,
}

/// One row per point of the corruption grid, pooling the queries of every seed.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchReport> {
    let mut cells = Vec::new();
    for &dropout in &spec.dropout {
        for &center in &spec.center_noise {
            for &rotation in &spec.rotation_noise {
                for &depth in &spec.depth_noise {
                    for &filter in &spec.filter_thresholds {
                        cells.push(Cell { dropout, center, rotation, depth, filter });
                    }
                }
            }
        }
    }
    let tasks: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| spec.seeds.iter().map(move |&s| (c, s))).collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(c, seed)| {
            let cell = &cells[c];
            let domain = |e: vq3d_core::synth::SynthError| Error::Config(e.to_string());
            let scene = generate_scene(seed, spec.frames, spec.objects).map_err(domain)?;
            let mut corruption = CorruptionSpec {
                center_noise_sigma: cell.center,
                rotation_noise_sigma: cell.rotation,
                submap_cuts: spec.submap_cuts.clone(),
                submap_transforms: Vec::new(),
                pose_dropout: cell.dropout,
                depth_noise_sigma: cell.depth,
                anchor_stride: spec.anchor_stride,
            };
            corruption.submap_transforms = random_submap_transforms(seed, corruption.n_submaps(), spec.scale_range);
            let frags = fragment_and_corrupt(&scene, &corruption).map_err(domain)?;
            let mut obs = render_observations(&scene);
            corrupt_depths(&mut obs, cell.depth, seed).map_err(domain)?;
            let options = PipelineOptions { filter_threshold: cell.filter, ..spec.options };
            run_pipeline(&frags, &obs, &scene.intrinsics, &options).map_err(|e| Error::Data(e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_seed = spec.seeds.len();
    let rows = cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let chunk = &outcomes[c * per_seed..(c + 1) * per_seed];
            let rows: Vec<_> = chunk.iter().flat_map(|o| o.summary.rows.iter().cloned()).collect();
            let s = EvaluationSummary::from_rows(rows, spec.options.thresholds);
            BenchRow {
                dropout: cell.dropout,
                center_noise: cell.center,
                rotation_noise: cell.rotation,
                depth_noise: cell.depth,
                filter_threshold: cell.filter,
                seeds: spec.seeds.clone(),
                n_queries: s.n_queries,
                posed_frames: chunk.iter().map(|o| o.world_poses.len()).sum(),
                qwp: s.qwp,
                succ: s.succ,
                succ_star: s.succ_star,
                mean_l2: s.mean_l2,
                mean_angle: s.mean_angle,
            }
        })
        .collect();
    Ok(BenchReport { thresholds: spec.options.thresholds, rows })
}

// ---------------------------------------------------------------- blur-scores

pub struct BlurOutput {
    pub scores: Vec<(FrameId, f64)>,
    /// Frame ids of the selected window, inclusive.
    pub window: Option<(FrameId, FrameId)>,
}

impl BlurOutput {
    pub fn csv(&self) -> String {
        blur_scores_csv(&self.scores)
    }
}

/// Scores every PGM in `dir` whose name carries a frame index, ordered by
/// frame, and picks the sharpest window of `window_len` consecutive entries.
pub fn blur_scores(dir: &Path, pattern: &FramePattern, window_len: usize, threshold: f64) -> Result<BlurOutput> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if path.extension().is_some_and(|e| e == "pgm") {
            if let Some(frame) = pattern.frame_of(&name) {
                files.push((frame, path));
            }
        }
    }
    files.sort();
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!("frame {} appears twice ({} and {})", w[0].0, w[0].1.display(), w[1].1.display())));
    }
    let scores = files
        .par_iter()
        .map(|(frame, path)| {
            let img = decode_pgm(&path.display().to_string(), &read_file(path)?)?;
            let s = blur_score(&img).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            Ok((*frame, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let window = if scores.len() >= window_len {
        let values: Vec<f64> = scores.iter().map(|s| s.1).collect();
        select_sharp_window(&values, window_len, threshold)
            .map_err(|e| Error::Config(e.to_string()))?
            .map(|FrameRange { start, end }| (scores[start].0, scores[end].0))
    } else {
        None
    };
    Ok(BlurOutput { scores, window })
}
