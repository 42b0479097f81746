//! Synthetic scenes with known ground truth.
//!
//! A scene is a smooth camera trajectory in a world frame plus objects and
//! landmarks placed in front of it. [`fragment_and_corrupt`] cuts the
//! trajectory into reconstruction submaps, each expressed in its own
//! coordinate system, and [`render_observations`] produces the ideal boxes,
//! depth grids and visual queries a detector and depth network would. Every
//! random draw comes from ChaCha8 streams keyed by the scene seed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::colmap::{CameraModel, ModelCamera, ModelImage, ModelPoint3D, Point2D, ReconstructionModel, TrackElement};
use crate::evaluation::{evaluate, EvaluationSummary, MetricThresholds};
use crate::frames::{Aggregation, BoundingBox, GrayImage, ResponseTrack, TrackFrame};
use crate::geometry::{
    project, rotation_to_wxyz, unproject, Direction, FrameId, Intrinsics, PixelPoint, PointTransform, RigidPose, Rotation,
    SimilarityTransform, Vec3,
};
use crate::localization::{localize_query, DepthGrid, QueryResult, VisualQuery};
use crate::registration::{
    apply_registration, filter_poses, merge_registered, register_submap, PoseSet, PoseSource, RegistrationError,
    RegistrationOptions, RegistrationReport,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("domain error: {0}")]
    Domain(String),
}

/// Half side length of rendered boxes, pixels.
pub const BOX_HALF_WIDTH: f64 = 10.0;

const STREAM_SCENE: u64 = 0;
const STREAM_CORRUPT: u64 = 1;
const STREAM_RENDER: u64 = 2;
const STREAM_DEPTH: u64 = 3;
const STREAM_SUBMAP: u64 = 4;
const STREAM_FRAMES: u64 = 5;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// 160x120 pinhole camera used by every synthetic scene.
pub fn default_intrinsics() -> Intrinsics {
    Intrinsics::new(120.0, 120.0, 80.0, 60.0, 160, 120).expect("constant intrinsics are valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub object_id: String,
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub seed: u64,
    pub landmarks: Vec<Vec3>,
    /// Camera-to-world poses of every frame, frame ids `0..n_frames`.
    pub trajectory: PoseSet,
    pub intrinsics: Intrinsics,
    pub objects: Vec<SceneObject>,
}

/// Camera looking along heading `yaw` with `pitch`, world z up; camera axes
/// are x right, y down, z forward.
fn look_rotation(yaw: f64, pitch: f64) -> Rotation {
    let (sy, cy) = libm::sincos(yaw);
    let (sp, cp) = libm::sincos(pitch);
    let forward = Vec3::new(cy * cp, sy * cp, sp);
    let right = forward.cross(&Vec3::z()).normalize();
    let down = forward.cross(&right);
    let m = Matrix3::from_columns(&[right, down, forward]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

impl SyntheticScene {
    pub fn n_frames(&self) -> usize {
        self.trajectory.len()
    }

    pub fn pose(&self, frame: FrameId) -> &RigidPose {
        self.trajectory.get(frame).expect("trajectory covers every frame")
    }

    /// Pixel and depth of a world point in `frame` when it lands far enough
    /// inside the image for a full box.
    pub fn observe(&self, frame: FrameId, point: &Vec3) -> Option<(PixelPoint, f64)> {
        let x_cam = self.pose(frame).inverse().transform_point(point);
        if x_cam.z < 0.05 {
            return None;
        }
        let (p, z) = project(&x_cam, &self.intrinsics).ok()?;
        let (w, h) = (f64::from(self.intrinsics.width()), f64::from(self.intrinsics.height()));
        let m = BOX_HALF_WIDTH;
        (p.u >= m && p.v >= m && p.u < w - m && p.v < h - m).then_some((p, z))
    }
}

fn place_in_view(
    rng: &mut ChaCha8Rng,
    trajectory: &PoseSet,
    k: &Intrinsics,
    frames: core::ops::Range<u64>,
    depth: (f64, f64),
) -> Vec3 {
    let m = BOX_HALF_WIDTH + 2.0;
    let frame = rng.random_range(frames);
    let u = rng.random_range(m..f64::from(k.width()) - m);
    let v = rng.random_range(m..f64::from(k.height()) - m);
    let d = rng.random_range(depth.0..depth.1);
    let x_cam = unproject(PixelPoint::new(u, v), d, k).expect("positive depth");
    trajectory.get(frame).expect("frame in range").transform_point(&x_cam)
}

pub fn generate_scene(seed: u64, n_frames: usize, n_objects: usize) -> Result<SyntheticScene, SynthError> {
    if n_frames < 2 {
        return Err(SynthError::Domain(format!("need at least 2 frames, got {n_frames}")));
    }
    if n_objects < 1 {
        return Err(SynthError::Domain("need at least 1 object".into()));
    }
    let mut rng = rng(seed, STREAM_SCENE);
    let n_way = 2 + n_frames / 20;
    let waypoints: Vec<(Vec3, Rotation)> = (0..n_way)
        .map(|_| {
            let c = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(1.2..1.8));
            let r = look_rotation(rng.random_range(-core::f64::consts::PI..core::f64::consts::PI), rng.random_range(-0.3..0.3));
            (c, r)
        })
        .collect();
    let mut trajectory = PoseSet::empty("world", PoseSource::WorldAnchor, Direction::CameraToWorld);
    for i in 0..n_frames {
        let s = i as f64 / (n_frames - 1) as f64 * (n_way - 1) as f64;
        let seg = (libm::floor(s) as usize).min(n_way - 2);
        let a = s - seg as f64;
        let (c0, r0) = waypoints[seg];
        let (c1, r1) = waypoints[seg + 1];
        let center = c0 * (1.0 - a) + c1 * a;
        let rot = r0.try_slerp(&r1, a, 1e-12).unwrap_or(r0);
        trajectory.insert(i as FrameId, RigidPose::new(rot, center, Direction::CameraToWorld));
    }
    let k = default_intrinsics();
    let last = n_frames as u64 - 1;
    let objects = (0..n_objects)
        .map(|j| SceneObject { object_id: format!("obj_{j:03}"), position: place_in_view(&mut rng, &trajectory, &k, 0..last, (1.0, 5.0)) })
        .collect();
    let landmarks = (0..60).map(|_| place_in_view(&mut rng, &trajectory, &k, 0..last + 1, (2.0, 8.0))).collect();
    Ok(SyntheticScene { seed, landmarks, trajectory, intrinsics: k, objects })
}

/// How the ideal trajectory is degraded into reconstruction submaps.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    /// Per-axis std-dev of camera-center noise, world meters.
    pub center_noise_sigma: f64,
    /// Per-axis std-dev of axis-angle rotation noise, radians.
    pub rotation_noise_sigma: f64,
    /// Frames at which a new submap starts.
    pub submap_cuts: Vec<FrameId>,
    /// Submap-to-world similarity of each submap. Empty means identity for all.
    pub submap_transforms: Vec<SimilarityTransform>,
    /// Probability that a frame loses its reconstruction pose.
    pub pose_dropout: f64,
    /// Std-dev of additive depth noise, meters (applied by [`corrupt_depths`]).
    pub depth_noise_sigma: f64,
    /// Every `anchor_stride`-th frame gets a world anchor pose.
    pub anchor_stride: usize,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            center_noise_sigma: 0.0,
            rotation_noise_sigma: 0.0,
            submap_cuts: Vec::new(),
            submap_transforms: Vec::new(),
            pose_dropout: 0.0,
            depth_noise_sigma: 0.0,
            anchor_stride: 1,
        }
    }
}

impl CorruptionSpec {
    fn validate(&self, n_frames: usize) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Domain(m.into()));
        if !(self.center_noise_sigma >= 0.0 && self.rotation_noise_sigma >= 0.0 && self.depth_noise_sigma >= 0.0) {
            return bad("noise sigmas must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.pose_dropout) {
            return bad("dropout must lie in [0, 1]");
        }
        if self.anchor_stride == 0 {
            return bad("anchor stride must be at least 1");
        }
        if let Some(c) = self.submap_cuts.iter().find(|&&c| c == 0 || c >= n_frames as u64) {
            return Err(SynthError::Domain(format!("cut {c} outside 1..{n_frames}")));
        }
        if !self.submap_transforms.is_empty() && self.submap_transforms.len() != self.n_submaps() {
            return Err(SynthError::Domain(format!(
                "{} submap transforms for {} submaps",
                self.submap_transforms.len(),
                self.n_submaps()
            )));
        }
        Ok(())
    }

    pub fn n_submaps(&self) -> usize {
        self.submap_cuts.iter().collect::<BTreeSet<_>>().len() + 1
    }
}

/// Random similarity with rotation uniform over SO(3), translation in a
/// 10 m cube and scale log-uniform in `scale_range`.
pub fn random_similarity<R: Rng>(rng: &mut R, scale_range: (f64, f64)) -> SimilarityTransform {
    let q = nalgebra::Quaternion::new(
        Normal::new(0.0, 1.0).unwrap().sample(rng),
        Normal::new(0.0, 1.0).unwrap().sample(rng),
        Normal::new(0.0, 1.0).unwrap().sample(rng),
        Normal::new(0.0, 1.0).unwrap().sample(rng),
    );
    let rotation = UnitQuaternion::from_quaternion(q);
    let translation = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let scale = if scale_range.0 == scale_range.1 {
        scale_range.0
    } else {
        libm::exp(rng.random_range(libm::log(scale_range.0)..libm::log(scale_range.1)))
    };
    SimilarityTransform::new(scale, rotation, translation).expect("positive scale")
}

/// `n` submap-to-world similarities drawn from their own stream of `seed`.
pub fn random_submap_transforms(seed: u64, n: usize, scale_range: (f64, f64)) -> Vec<SimilarityTransform> {
    let mut rng = rng(seed, STREAM_SUBMAP);
    (0..n).map(|_| random_similarity(&mut rng, scale_range)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fragments {
    /// World-to-camera poses of each submap in its own system.
    pub submaps: Vec<PoseSet>,
    /// Noiseless camera-to-world poses of every `anchor_stride`-th frame.
    pub anchor: PoseSet,
    /// Synthetic reprojection error per anchor frame, pixels, in `[0, 4)`.
    pub anchor_reproj: BTreeMap<FrameId, f64>,
    /// Submap-to-world map of each submap.
    pub truth: Vec<SimilarityTransform>,
    /// Frames removed by dropout.
    pub dropped: BTreeSet<FrameId>,
}

pub fn fragment_and_corrupt(scene: &SyntheticScene, spec: &CorruptionSpec) -> Result<Fragments, SynthError> {
    let n = scene.n_frames();
    spec.validate(n)?;
    let mut rng = rng(scene.seed, STREAM_CORRUPT);
    let cuts: BTreeSet<FrameId> = spec.submap_cuts.iter().copied().collect();
    let truth: Vec<SimilarityTransform> = if spec.submap_transforms.is_empty() {
        vec![SimilarityTransform::identity(); spec.n_submaps()]
    } else {
        spec.submap_transforms.clone()
    };
    let center_noise = Normal::new(0.0, spec.center_noise_sigma).expect("validated sigma");
    let rot_noise = Normal::new(0.0, spec.rotation_noise_sigma).expect("validated sigma");

    let mut submaps: Vec<PoseSet> = (0..truth.len())
        .map(|k| PoseSet::empty(&format!("submap_{k}"), PoseSource::Reconstruction, Direction::WorldToCamera))
        .collect();
    let mut dropped = BTreeSet::new();
    let mut k = 0;
    for (frame, pose) in scene.trajectory.iter() {
        if cuts.contains(&frame) {
            k += 1;
        }
        // Draw every variate for every frame so the stream does not depend on
        // which frames are dropped.
        let keep = rng.random::<f64>() >= spec.pose_dropout;
        let dc = Vec3::new(center_noise.sample(&mut rng), center_noise.sample(&mut rng), center_noise.sample(&mut rng));
        let dr = Vec3::new(rot_noise.sample(&mut rng), rot_noise.sample(&mut rng), rot_noise.sample(&mut rng));
        if !keep {
            dropped.insert(frame);
            continue;
        }
        let noisy = RigidPose::new(Rotation::new(dr) * pose.rotation, pose.translation + dc, Direction::CameraToWorld);
        submaps[k].insert(frame, truth[k].inverse().apply_to_pose(&noisy));
    }

    let mut anchor = PoseSet::empty("world", PoseSource::WorldAnchor, Direction::CameraToWorld);
    let mut anchor_reproj = BTreeMap::new();
    for (frame, pose) in scene.trajectory.iter() {
        let e = rng.random_range(0.0..4.0);
        if (frame as usize).is_multiple_of(spec.anchor_stride) {
            anchor.insert(frame, *pose);
            anchor_reproj.insert(frame, e);
        }
    }
    Ok(Fragments { submaps, anchor, anchor_reproj, truth, dropped })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub object_id: String,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    pub detections: BTreeMap<FrameId, Vec<Detection>>,
    /// Zero except at detected object pixels, which hold the true depth.
    pub depths: BTreeMap<FrameId, DepthGrid>,
    pub queries: Vec<VisualQuery>,
}

pub fn clip_id(seed: u64) -> String {
    format!("clip_{seed:06}")
}

/// Ideal detections, depth and one query per object that has a visible run
/// ending before the last frame.
pub fn render_observations(scene: &SyntheticScene) -> Observations {
    let mut rng = rng(scene.seed, STREAM_RENDER);
    let k = &scene.intrinsics;
    let mut detections: BTreeMap<FrameId, Vec<Detection>> = BTreeMap::new();
    let mut depths = BTreeMap::new();
    let mut visible: Vec<Vec<(FrameId, BoundingBox)>> = vec![Vec::new(); scene.objects.len()];
    for frame in scene.trajectory.frames() {
        let hits: Vec<(usize, PixelPoint, f64)> = scene
            .objects
            .iter()
            .enumerate()
            .filter_map(|(j, o)| scene.observe(frame, &o.position).map(|(p, z)| (j, p, z)))
            .collect();
        let pixel = |p: &PixelPoint| (libm::floor(p.u) as i64, libm::floor(p.v) as i64);
        let mut grid = DepthGrid::empty(frame, k.width(), k.height());
        let mut dets = Vec::new();
        for (j, p, z) in &hits {
            // Two objects sharing a depth pixel would corrupt each other.
            if hits.iter().filter(|(_, q, _)| pixel(q) == pixel(p)).count() > 1 {
                continue;
            }
            let h = BOX_HALF_WIDTH;
            let bbox = BoundingBox { x_min: p.u - h, y_min: p.v - h, x_max: p.u + h, y_max: p.v + h };
            grid.set(bbox.center(), *z as f32);
            visible[*j].push((frame, bbox));
            dets.push(Detection { object_id: scene.objects[*j].object_id.clone(), bbox });
        }
        if !dets.is_empty() {
            detections.insert(frame, dets);
            depths.insert(frame, grid);
        }
    }

    let last = scene.n_frames() as u64 - 1;
    let mut queries = Vec::new();
    for (j, obj) in scene.objects.iter().enumerate() {
        let seen: Vec<&(FrameId, BoundingBox)> = visible[j].iter().filter(|(f, _)| *f < last).collect();
        let gap = rng.random_range(1..=4u64);
        let Some(&&(end, _)) = seen.last() else {
            continue;
        };
        let mut start_idx = seen.len() - 1;
        while start_idx > 0 && seen[start_idx - 1].0 + 1 == seen[start_idx].0 {
            start_idx -= 1;
        }
        let track = seen[start_idx..].iter().map(|&&(frame_id, bbox)| TrackFrame { frame_id, bbox }).collect();
        queries.push(VisualQuery {
            query_id: format!("{}_{}", clip_id(scene.seed), obj.object_id),
            clip_id: clip_id(scene.seed),
            query_frame: (end + gap).min(last),
            object_id: obj.object_id.clone(),
            crop_path: None,
            track: ResponseTrack::new(track).expect("visible runs are increasing and non-empty"),
            gt_world: obj.position,
        });
    }
    Observations { detections, depths, queries }
}

/// Adds Gaussian noise to every non-zero depth value.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
pub fn corrupt_depths(obs: &mut Observations, sigma: f64, seed: u64) -> Result<(), SynthError> {
    if !(sigma >= 0.0) {
        return Err(SynthError::Domain("depth noise must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(());
    }
    let mut rng = rng(seed, STREAM_DEPTH);
    let noise = Normal::new(0.0, sigma).expect("validated sigma");
    for grid in obs.depths.values_mut() {
        for v in grid.values.iter_mut().filter(|v| **v > 0.0) {
            *v = (f64::from(*v) + noise.sample(&mut rng)).max(1e-3) as f32;
        }
    }
    Ok(())
}

/// Grayscale frames: landmarks as bright 3x3 spots on a dark background,
/// with a per-frame box blur of radius 0, 1 or 2 so sharpness varies.
pub fn render_gray_frames(scene: &SyntheticScene) -> Vec<GrayImage> {
    let mut rng = rng(scene.seed, STREAM_FRAMES);
    let (w, h) = (scene.intrinsics.width() as usize, scene.intrinsics.height() as usize);
    let mut out = Vec::with_capacity(scene.n_frames());
    for frame in scene.trajectory.frames() {
        let radius = [0usize, 0, 0, 1, 2][rng.random_range(0..5)];
        let mut px = vec![0.2; w * h];
        for lm in &scene.landmarks {
            let Some((p, _)) = scene.observe(frame, lm) else { continue };
            let (c, r) = (libm::floor(p.u) as usize, libm::floor(p.v) as usize);
            for y in r - 1..=r + 1 {
                for x in c - 1..=c + 1 {
                    px[y * w + x] = 0.9;
                }
            }
        }
        out.push(GrayImage::new(w, h, box_blur(&px, w, h, radius)).expect("values stay in [0, 1]"));
    }
    out
}

fn box_blur(px: &[f64], w: usize, h: usize, radius: usize) -> Vec<f64> {
    if radius == 0 {
        return px.to_vec();
    }
    let mut out = vec![0.0; px.len()];
    for y in 0..h {
        for x in 0..w {
            let (y0, y1) = (y.saturating_sub(radius), (y + radius).min(h - 1));
            let (x0, x1) = (x.saturating_sub(radius), (x + radius).min(w - 1));
            let mut sum = 0.0;
            for yy in y0..=y1 {
                sum += px[yy * w + x0..=yy * w + x1].iter().sum::<f64>();
            }
            out[y * w + x] = sum / ((y1 - y0 + 1) * (x1 - x0 + 1)) as f64;
        }
    }
    out
}

/// Text-serializable reconstruction of one submap: a single PINHOLE camera,
/// one image per posed frame named `frame_XXXXXX.jpg`, and the landmarks
/// those frames observe, expressed in the submap's system.
pub fn submap_model(scene: &SyntheticScene, submap: &PoseSet, truth: &SimilarityTransform) -> ReconstructionModel {
    let k = &scene.intrinsics;
    let mut model = ReconstructionModel::default();
    model.cameras.insert(1, ModelCamera {
        camera_id: 1,
        model: CameraModel::Pinhole,
        width: u64::from(k.width()),
        height: u64::from(k.height()),
        params: vec![k.fx(), k.fy(), k.cx(), k.cy()],
    });
    let to_sub = truth.inverse();
    let mut tracks: BTreeMap<u64, Vec<TrackElement>> = BTreeMap::new();
    for (idx, (frame, pose)) in submap.iter().enumerate() {
        let image_id = idx as u32 + 1;
        let w2c = pose.to_world_to_camera();
        let mut points2d = Vec::new();
        for (l, lm) in scene.landmarks.iter().enumerate() {
            if let Some((p, _)) = scene.observe(frame, lm) {
                let point3d_id = l as u64 + 1;
                tracks.entry(point3d_id).or_default().push(TrackElement { image_id, point2d_idx: points2d.len() as u32 });
                points2d.push(Point2D { x: p.u, y: p.v, point3d_id: Some(point3d_id) });
            }
        }
        model.images.insert(image_id, ModelImage {
            image_id,
            qvec: rotation_to_wxyz(&w2c.rotation),
            tvec: [w2c.translation.x, w2c.translation.y, w2c.translation.z],
            camera_id: 1,
            name: format!("frame_{frame:06}.jpg"),
            points2d,
        });
    }
    for (point3d_id, track) in tracks {
        let xyz = to_sub.transform_point(&scene.landmarks[point3d_id as usize - 1]);
        model.points3d.insert(point3d_id, ModelPoint3D {
            point3d_id,
            xyz: [xyz.x, xyz.y, xyz.z],
            rgb: [(point3d_id * 37 % 256) as u8, (point3d_id * 91 % 256) as u8, (point3d_id * 53 % 256) as u8],
            error: 0.5,
            track,
        });
    }
    model
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineOptions {
    pub registration: RegistrationOptions,
    /// Anchor reprojection-error threshold; `None` disables filtering.
    pub filter_threshold: Option<f64>,
    pub aggregation: Aggregation,
    pub thresholds: MetricThresholds,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            registration: RegistrationOptions::default(),
            filter_threshold: None,
            aggregation: Aggregation::Last,
            thresholds: MetricThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub anchor_frames: usize,
    pub reports: Vec<Result<RegistrationReport, RegistrationError>>,
    pub world_poses: PoseSet,
    pub results: Vec<QueryResult>,
    pub summary: EvaluationSummary,
}

/// Filter anchors, register each submap, merge, localize every query, evaluate.
pub fn run_pipeline(
    fragments: &Fragments,
    obs: &Observations,
    k: &Intrinsics,
    options: &PipelineOptions,
) -> Result<PipelineOutcome, crate::evaluation::EvaluationError> {
    let anchor = filter_poses(&fragments.anchor, &fragments.anchor_reproj, options.filter_threshold);
    let reports: Vec<_> = fragments.submaps.iter().map(|s| register_submap(s, &anchor, &options.registration)).collect();
    let parts: Vec<(PoseSet, f64)> = fragments
        .submaps
        .iter()
        .zip(&reports)
        .filter_map(|(s, r)| r.as_ref().ok().map(|r| (apply_registration(r, s, "world"), r.mean_error)))
        .collect();
    let world_poses = merge_registered("world", &parts);
    let results: Vec<QueryResult> =
        obs.queries.iter().map(|q| localize_query(q, &world_poses, &obs.depths, k, options.aggregation)).collect();
    let summary = evaluate(&results, &obs.queries, &options.thresholds)?;
    Ok(PipelineOutcome { anchor_frames: anchor.len(), reports, world_poses, results, summary })
}
