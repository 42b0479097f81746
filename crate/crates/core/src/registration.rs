//! Registration of reconstruction submaps into the world (annotation) frame.
//!
//! Two estimators are offered. [`Method::PerFrameMin`] tries the rigid
//! transform implied by every frame posed in both systems and keeps the one
//! with the smallest [`transform_error`] over all common frames.
//! [`Method::LeastSquaresSim3`] solves the closed-form least-squares
//! similarity (rotation, translation and uniform scale) between the camera
//! centers of the common frames, which also absorbs the unknown scale of a
//! monocular reconstruction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, UnitQuaternion};

use crate::geometry::{
    rotation_geodesic_angle, Direction, FrameId, PointTransform, RigidPose, SimilarityTransform, Vec3,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RegistrationError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("frame {0} is missing from a pose set")]
    MissingFrame(FrameId),
    #[error("submap cannot be registered: {0}")]
    Unregistrable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum PoseSource {
    Reconstruction,
    WorldAnchor,
}

/// Frame-indexed camera poses living in one coordinate system. All poses
/// share the set's direction; [`PoseSet::insert`] converts on the way in.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet {
    pub system_label: String,
    pub source: PoseSource,
    direction: Direction,
    poses: BTreeMap<FrameId, RigidPose>,
}

impl PoseSet {
    pub fn empty(system_label: &str, source: PoseSource, direction: Direction) -> Self {
        Self { system_label: system_label.into(), source, direction, poses: BTreeMap::new() }
    }

    /// Builds a set in `direction`, converting any pose stored the other way.
    pub fn from_poses<I>(system_label: &str, source: PoseSource, direction: Direction, poses: I) -> Self
    where
        I: IntoIterator<Item = (FrameId, RigidPose)>,
    {
        let mut set = Self::empty(system_label, source, direction);
        for (frame, pose) in poses {
            set.insert(frame, pose);
        }
        set
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn insert(&mut self, frame: FrameId, pose: RigidPose) -> Option<RigidPose> {
        self.poses.insert(frame, pose.to_direction(self.direction))
    }

    pub fn remove(&mut self, frame: FrameId) -> Option<RigidPose> {
        self.poses.remove(&frame)
    }

    pub fn get(&self, frame: FrameId) -> Option<&RigidPose> {
        self.poses.get(&frame)
    }

    pub fn contains(&self, frame: FrameId) -> bool {
        self.poses.contains_key(&frame)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (FrameId, &RigidPose)> + '_ {
        self.poses.iter().map(|(k, v)| (*k, v))
    }

    pub fn frames(&self) -> impl Iterator<Item = FrameId> + '_ {
        self.poses.keys().copied()
    }

    pub fn frame_set(&self) -> BTreeSet<FrameId> {
        self.poses.keys().copied().collect()
    }

    /// The same set with every pose expressed in `direction`.
    pub fn to_direction(&self, direction: Direction) -> PoseSet {
        PoseSet::from_poses(&self.system_label, self.source, direction, self.poses.iter().map(|(k, v)| (*k, *v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Method {
    /// Rigid transform of the single best frame.
    #[default]
    PerFrameMin,
    /// Closed-form least-squares similarity on camera centers.
    LeastSquaresSim3,
}

impl Method {
    pub fn default_min_common(self) -> usize {
        match self {
            Method::PerFrameMin => 1,
            Method::LeastSquaresSim3 => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegistrationOptions {
    pub method: Method,
    /// Meters of translation error equivalent to one radian of rotation error.
    pub lambda: f64,
    /// Defaults to [`Method::default_min_common`] when `None`.
    pub min_common: Option<usize>,
}

impl Default for RegistrationOptions {
    fn default() -> Self {
        Self { method: Method::PerFrameMin, lambda: 1.0, min_common: None }
    }
}

impl RegistrationOptions {
    pub fn with_method(method: Method) -> Self {
        Self { method, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameResidual {
    pub frame: FrameId,
    /// Meters.
    pub translation: f64,
    /// Radians.
    pub rotation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationReport {
    pub transform: SimilarityTransform,
    pub common_frames: Vec<FrameId>,
    pub residuals: Vec<FrameResidual>,
    /// Frame whose pose pair produced the transform (`PerFrameMin` only).
    pub chosen_frame: Option<FrameId>,
    pub method: Method,
    /// [`transform_error`] of the chosen transform over all common frames.
    pub mean_error: f64,
}

/// Sorted intersection of the two sets' frames.
pub fn common_frames(a: &PoseSet, b: &PoseSet) -> Vec<FrameId> {
    a.frames().filter(|f| b.contains(*f)).collect()
}

fn camera_to_world(set: &PoseSet, frame: FrameId) -> Result<RigidPose, RegistrationError> {
    set.get(frame).map(RigidPose::to_camera_to_world).ok_or(RegistrationError::MissingFrame(frame))
}

/// Rigid transform `P_M(frame) ∘ P_C(frame)^-1` (camera-to-world on both
/// sides) taking reconstruction coordinates to world coordinates.
pub fn candidate_transform(frame: FrameId, s_c: &PoseSet, s_m: &PoseSet) -> Result<SimilarityTransform, RegistrationError> {
    let c = camera_to_world(s_c, frame)?;
    let m = camera_to_world(s_m, frame)?;
    Ok(m.to_transform().compose(&c.to_transform().inverse()))
}

fn residual(t: &SimilarityTransform, c: &RigidPose, m: &RigidPose, frame: FrameId) -> FrameResidual {
    FrameResidual {
        frame,
        translation: (m.translation - t.transform_point(&c.translation)).norm(),
        rotation: rotation_geodesic_angle(&m.rotation, &(t.rotation * c.rotation)),
    }
}

fn residuals(t: &SimilarityTransform, s_c: &PoseSet, s_m: &PoseSet, frames: &[FrameId]) -> Result<Vec<FrameResidual>, RegistrationError> {
    frames
        .iter()
        .map(|&f| Ok(residual(t, &camera_to_world(s_c, f)?, &camera_to_world(s_m, f)?, f)))
        .collect()
}

fn mean_error(res: &[FrameResidual], lambda: f64) -> f64 {
    res.iter().map(|r| r.translation + lambda * r.rotation).sum::<f64>() / res.len() as f64
}

/// Mean over `frames` of `|c_M - t(c_C)| + lambda * angle(R_M, R_t R_C)`.
pub fn transform_error(
    t: &SimilarityTransform,
    s_c: &PoseSet,
    s_m: &PoseSet,
    frames: &[FrameId],
    lambda: f64,
) -> Result<f64, RegistrationError> {
    if frames.is_empty() {
        return Err(RegistrationError::Domain("transform error over an empty frame list"));
    }
    Ok(mean_error(&residuals(t, s_c, s_m, frames)?, lambda))
}

/// Estimates the transform taking `s_c`'s system into `s_m`'s.
pub fn register_submap(s_c: &PoseSet, s_m: &PoseSet, options: &RegistrationOptions) -> Result<RegistrationReport, RegistrationError> {
    if !(options.lambda.is_finite() && options.lambda >= 0.0) {
        return Err(RegistrationError::Domain("lambda must be finite and non-negative"));
    }
    let common = common_frames(s_c, s_m);
    let min_common = options.min_common.unwrap_or(options.method.default_min_common()).max(1);
    if common.len() < min_common {
        return Err(RegistrationError::Unregistrable(format!(
            "{} common frames, at least {min_common} required",
            common.len()
        )));
    }
    let (transform, chosen_frame) = match options.method {
        Method::PerFrameMin => {
            let mut best: Option<(f64, FrameId, SimilarityTransform)> = None;
            for &frame in &common {
                let t = candidate_transform(frame, s_c, s_m)?;
                let err = transform_error(&t, s_c, s_m, &common, options.lambda)?;
                // Strict comparison keeps the lowest frame id on ties.
                if best.as_ref().is_none_or(|(e, _, _)| err < *e) {
                    best = Some((err, frame, t));
                }
            }
            let (_, frame, t) = best.expect("common frames are non-empty");
            (t, Some(frame))
        }
        Method::LeastSquaresSim3 => {
            let src: Vec<Vec3> = common.iter().map(|&f| camera_to_world(s_c, f).map(|p| p.translation)).collect::<Result<_, _>>()?;
            let dst: Vec<Vec3> = common.iter().map(|&f| camera_to_world(s_m, f).map(|p| p.translation)).collect::<Result<_, _>>()?;
            (align_similarity(&src, &dst)?, None)
        }
    };
    let residuals = residuals(&transform, s_c, s_m, &common)?;
    let mean_error = mean_error(&residuals, options.lambda);
    Ok(RegistrationReport { transform, common_frames: common, residuals, chosen_frame, method: options.method, mean_error })
}

/// Least-squares similarity `dst ≈ s R src + t` (Umeyama). Requires at least
/// three correspondences whose source points are not collinear.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail the check
pub fn align_similarity(src: &[Vec3], dst: &[Vec3]) -> Result<SimilarityTransform, RegistrationError> {
    if src.len() != dst.len() {
        return Err(RegistrationError::Domain("correspondence lists differ in length"));
    }
    if src.len() < 3 {
        return Err(RegistrationError::Unregistrable(format!("{} correspondences, similarity needs 3", src.len())));
    }
    let n = src.len() as f64;
    let mu_src = src.iter().sum::<Vec3>() / n;
    let mu_dst = dst.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_src = 0.0;
    for (a, b) in src.iter().zip(dst) {
        let da = a - mu_src;
        let db = b - mu_dst;
        cov += db * da.transpose();
        scatter += da * da.transpose();
        var_src += da.norm_squared();
    }
    cov /= n;
    scatter /= n;
    var_src /= n;

    // Collinear (or coincident) source centers leave the rotation about the
    // line undetermined.
    let spread = scatter.symmetric_eigenvalues();
    let mut ev = [spread[0], spread[1], spread[2]];
    ev.sort_by(f64::total_cmp);
    if !(ev[2] > 0.0) || ev[1] <= 1e-10 * ev[2] {
        return Err(RegistrationError::Unregistrable("camera centers are collinear".into()));
    }

    // Singular values are sorted descending, so the reflection fix lands on the smallest.
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested U"), svd.v_t.expect("requested V^T"));
    let d = svd.singular_values;
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let rot = u * s * v_t;
    let scale = (d[0] + d[1] + s[(2, 2)] * d[2]) / var_src;
    let rotation = UnitQuaternion::from_matrix(&rot);
    let translation = mu_dst - scale * (rotation * mu_src);
    SimilarityTransform::new(scale, rotation, translation).map_err(|_| RegistrationError::Unregistrable("degenerate scale".into()))
}

/// Maps every pose of `s_c` into the world system. Output is camera-to-world.
pub fn apply_registration(report: &RegistrationReport, s_c: &PoseSet, world_label: &str) -> PoseSet {
    PoseSet::from_poses(
        world_label,
        s_c.source,
        Direction::CameraToWorld,
        s_c.iter().map(|(f, p)| (f, report.transform.apply_to_pose(p))),
    )
}

/// Unions registered submaps. A frame posed by several submaps takes the pose
/// of the submap with the lowest mean registration error; earlier submaps win
/// exact ties.
pub fn merge_registered(world_label: &str, parts: &[(PoseSet, f64)]) -> PoseSet {
    let mut owner: BTreeMap<FrameId, (f64, RigidPose)> = BTreeMap::new();
    for (set, err) in parts {
        for (frame, pose) in set.iter() {
            match owner.get(&frame) {
                Some((e, _)) if *e <= *err => {}
                _ => {
                    owner.insert(frame, (*err, pose.to_camera_to_world()));
                }
            }
        }
    }
    PoseSet::from_poses(
        world_label,
        PoseSource::Reconstruction,
        Direction::CameraToWorld,
        owner.into_iter().map(|(f, (_, p))| (f, p)),
    )
}

/// Drops frames whose reprojection error exceeds `threshold`. `None` keeps
/// everything, as do frames without a recorded error.
pub fn filter_poses(s: &PoseSet, reproj: &BTreeMap<FrameId, f64>, threshold: Option<f64>) -> PoseSet {
    let Some(tau) = threshold else {
        return s.clone();
    };
    let mut out = PoseSet::empty(&s.system_label, s.source, s.direction);
    for (frame, pose) in s.iter() {
        if reproj.get(&frame).is_some_and(|&e| e > tau) {
            continue;
        }
        out.insert(frame, *pose);
    }
    out
}
