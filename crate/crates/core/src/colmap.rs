//! Sparse reconstruction model types and the external SfM command plan.
//!
//! Byte-level readers and writers live in the std companion crate; this module
//! holds the in-memory model, its referential-integrity check, the conversion
//! to pose sets, and the command lines for the customized reconstruction run.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{rotation_from_wxyz, Direction, FrameId, Intrinsics, RigidPose, Vec3};
use crate::registration::{PoseSet, PoseSource};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("unknown camera model `{0}`")]
    UnknownModel(String),
    #[error("camera model {0} cannot be converted to pinhole intrinsics")]
    UnsupportedModel(CameraModel),
    #[error("camera {camera_id}: {reason}")]
    InvalidCamera { camera_id: u32, reason: String },
    #[error("could not parse a frame index from image names: {}", .0.join(", "))]
    Name(Vec<String>),
}

/// Camera models of the reconstruction tool, with their numeric ids and
/// parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CameraModel {
    SimplePinhole,
    Pinhole,
    SimpleRadial,
    Radial,
    OpenCv,
    OpenCvFisheye,
    FullOpenCv,
    Fov,
    SimpleRadialFisheye,
    RadialFisheye,
    ThinPrismFisheye,
}

const MODELS: [(CameraModel, i32, &str, usize); 11] = [
    (CameraModel::SimplePinhole, 0, "SIMPLE_PINHOLE", 3),
    (CameraModel::Pinhole, 1, "PINHOLE", 4),
    (CameraModel::SimpleRadial, 2, "SIMPLE_RADIAL", 4),
    (CameraModel::Radial, 3, "RADIAL", 5),
    (CameraModel::OpenCv, 4, "OPENCV", 8),
    (CameraModel::OpenCvFisheye, 5, "OPENCV_FISHEYE", 8),
    (CameraModel::FullOpenCv, 6, "FULL_OPENCV", 12),
    (CameraModel::Fov, 7, "FOV", 5),
    (CameraModel::SimpleRadialFisheye, 8, "SIMPLE_RADIAL_FISHEYE", 4),
    (CameraModel::RadialFisheye, 9, "RADIAL_FISHEYE", 5),
    (CameraModel::ThinPrismFisheye, 10, "THIN_PRISM_FISHEYE", 12),
];

impl CameraModel {
    fn entry(self) -> &'static (CameraModel, i32, &'static str, usize) {
        MODELS.iter().find(|e| e.0 == self).expect("every model is tabulated")
    }

    pub fn id(self) -> i32 {
        self.entry().1
    }

    pub fn name(self) -> &'static str {
        self.entry().2
    }

    pub fn num_params(self) -> usize {
        self.entry().3
    }

    pub fn from_id(id: i32) -> Option<Self> {
        MODELS.iter().find(|e| e.1 == id).map(|e| e.0)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        MODELS.iter().find(|e| e.2 == name).map(|e| e.0)
    }
}

impl fmt::Display for CameraModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelCamera {
    pub camera_id: u32,
    pub model: CameraModel,
    pub width: u64,
    pub height: u64,
    pub params: Vec<f64>,
}

impl ModelCamera {
    /// Pinhole intrinsics for the pinhole-compatible models. Distortion
    /// coefficients of the radial and OpenCV models are ignored.
    pub fn intrinsics(&self) -> Result<Intrinsics, ModelError> {
        let p = &self.params;
        if p.len() != self.model.num_params() {
            return Err(self.invalid("parameter count does not match the model"));
        }
        let (fx, fy, cx, cy) = match self.model {
            CameraModel::SimplePinhole | CameraModel::SimpleRadial | CameraModel::Radial => (p[0], p[0], p[1], p[2]),
            CameraModel::Pinhole | CameraModel::OpenCv => (p[0], p[1], p[2], p[3]),
            other => return Err(ModelError::UnsupportedModel(other)),
        };
        let dim = |v: u64| u32::try_from(v).map_err(|_| self.invalid("image size does not fit in 32 bits"));
        Intrinsics::new(fx, fy, cx, cy, dim(self.width)?, dim(self.height)?)
            .map_err(|e| self.invalid(&e.to_string()))
    }

    fn invalid(&self, reason: &str) -> ModelError {
        ModelError::InvalidCamera { camera_id: self.camera_id, reason: reason.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
    /// `None` for keypoints without a triangulated point (`-1` on disk).
    pub point3d_id: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelImage {
    pub image_id: u32,
    /// `(qw, qx, qy, qz)` of the world-to-camera rotation, as stored.
    pub qvec: [f64; 4],
    pub tvec: [f64; 3],
    pub camera_id: u32,
    pub name: String,
    pub points2d: Vec<Point2D>,
}

impl ModelImage {
    pub fn pose(&self) -> Result<RigidPose, ModelError> {
        let [w, x, y, z] = self.qvec;
        let rotation = rotation_from_wxyz(w, x, y, z)
            .map_err(|_| ModelError::Integrity(format!("image {}: quaternion is not normalizable", self.image_id)))?;
        let [tx, ty, tz] = self.tvec;
        Ok(RigidPose::new(rotation, Vec3::new(tx, ty, tz), Direction::WorldToCamera))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrackElement {
    pub image_id: u32,
    pub point2d_idx: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelPoint3D {
    pub point3d_id: u64,
    pub xyz: [f64; 3],
    pub rgb: [u8; 3],
    pub error: f64,
    pub track: Vec<TrackElement>,
}

/// Cameras, images and points of one sparse reconstruction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReconstructionModel {
    pub cameras: BTreeMap<u32, ModelCamera>,
    pub images: BTreeMap<u32, ModelImage>,
    pub points3d: BTreeMap<u64, ModelPoint3D>,
}

impl ReconstructionModel {
    /// Checks parameter arity, quaternion normalizability and every
    /// cross-collection reference.
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |msg: String| Err(ModelError::Integrity(msg));
        for (id, cam) in &self.cameras {
            if *id != cam.camera_id {
                return fail(format!("camera keyed {id} has id {}", cam.camera_id));
            }
            if cam.params.len() != cam.model.num_params() {
                return fail(format!(
                    "camera {id}: {} expects {} params, got {}",
                    cam.model,
                    cam.model.num_params(),
                    cam.params.len()
                ));
            }
        }
        for (id, img) in &self.images {
            if *id != img.image_id {
                return fail(format!("image keyed {id} has id {}", img.image_id));
            }
            if !self.cameras.contains_key(&img.camera_id) {
                return fail(format!("image {id} references missing camera {}", img.camera_id));
            }
            if img.name.is_empty() {
                return fail(format!("image {id} has an empty name"));
            }
            img.pose()?;
            for (idx, p) in img.points2d.iter().enumerate() {
                if let Some(pid) = p.point3d_id {
                    if !self.points3d.contains_key(&pid) {
                        return fail(format!("image {id} point2D {idx} references missing point3D {pid}"));
                    }
                }
            }
        }
        for (id, pt) in &self.points3d {
            if *id != pt.point3d_id {
                return fail(format!("point3D keyed {id} has id {}", pt.point3d_id));
            }
            for el in &pt.track {
                let Some(img) = self.images.get(&el.image_id) else {
                    return fail(format!("point3D {id} track references missing image {}", el.image_id));
                };
                if el.point2d_idx as usize >= img.points2d.len() {
                    return fail(format!(
                        "point3D {id} track references point2D {} of image {} which has {}",
                        el.point2d_idx,
                        el.image_id,
                        img.points2d.len()
                    ));
                }
            }
        }
        Ok(())
    }

    /// Builds a world-to-camera pose set keyed by the frame index that
    /// `frame_of` extracts from each image name.
    pub fn extract_pose_set<F>(&self, system_label: &str, frame_of: F) -> Result<PoseSet, ModelError>
    where
        F: Fn(&str) -> Option<FrameId>,
    {
        let mut poses = BTreeMap::new();
        let mut bad = Vec::new();
        for img in self.images.values() {
            match frame_of(&img.name) {
                Some(frame) => {
                    if poses.insert(frame, img.pose()?).is_some() {
                        bad.push(format!("{} (duplicate frame {frame})", img.name));
                    }
                }
                None => bad.push(img.name.clone()),
            }
        }
        if !bad.is_empty() {
            return Err(ModelError::Name(bad));
        }
        Ok(PoseSet::from_poses(system_label, PoseSource::Reconstruction, Direction::WorldToCamera, poses))
    }

    /// Mean reprojection error per image, averaged over the errors of the
    /// triangulated points it observes. Images without observations are absent.
    pub fn mean_point_error_per_image(&self) -> BTreeMap<u32, f64> {
        let mut acc: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for pt in self.points3d.values() {
            for el in &pt.track {
                let e = acc.entry(el.image_id).or_insert((0.0, 0));
                e.0 += pt.error;
                e.1 += 1;
            }
        }
        acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
    }
}

/// Default frame key: the digits following the last `frame_` in the name.
/// `frame_000042.jpg` maps to 42.
pub fn default_frame_index(name: &str) -> Option<FrameId> {
    let start = name.rfind("frame_")? + "frame_".len();
    let digits: &str = {
        let rest = &name[start..];
        let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
        &rest[..end]
    };
    if digits.is_empty() {
        return None;
    }
    digits.parse().ok()
}

/// Mapper settings that shorten global bundle adjustment on long videos.
pub const MAPPER_FLAGS: [(&str, &str); 4] = [
    ("--Mapper.ba_global_max_num_iterations", "30"),
    ("--Mapper.ba_global_images_ratio", "1.4"),
    ("--Mapper.ba_global_max_refinement", "3"),
    ("--Mapper.ba_global_points_freq", "200000"),
];

pub const TOOL: &str = "colmap";

/// `colmap mapper` with the four global-BA flags followed by the path flags.
pub fn emit_mapper_command(db_path: &str, image_path: &str, output_path: &str) -> Vec<String> {
    let mut argv = vec![TOOL.to_string(), "mapper".to_string()];
    for (flag, value) in MAPPER_FLAGS {
        argv.push(flag.to_string());
        argv.push(value.to_string());
    }
    for (flag, value) in [
        ("--database_path", db_path),
        ("--image_path", image_path),
        ("--output_path", output_path),
    ] {
        argv.push(flag.to_string());
        argv.push(value.to_string());
    }
    argv
}

/// Paths a plan reads from and writes to, relative to the clip directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanLayout {
    pub database: String,
    pub images: String,
    pub sparse: String,
}

impl PlanLayout {
    pub fn for_clip(clip_dir: &str) -> Self {
        let base = clip_dir.trim_end_matches('/');
        let join = |leaf: &str| if base.is_empty() { leaf.to_string() } else { format!("{base}/{leaf}") };
        Self { database: join("database.db"), images: join("images"), sparse: join("sparse") }
    }
}

/// Separate feature extraction, sequential matching and sparse mapping.
/// Extraction and matching run with tool defaults (SIFT features).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelinePlan {
    pub layout: PlanLayout,
    pub commands: Vec<Vec<String>>,
}

pub fn emit_pipeline_plan(clip_dir: &str) -> PipelinePlan {
    let layout = PlanLayout::for_clip(clip_dir);
    let s = |v: &str| v.to_string();
    let commands = vec![
        vec![s(TOOL), s("feature_extractor"), s("--database_path"), layout.database.clone(), s("--image_path"), layout.images.clone()],
        vec![s(TOOL), s("sequential_matcher"), s("--database_path"), layout.database.clone()],
        emit_mapper_command(&layout.database, &layout.images, &layout.sparse),
    ];
    PipelinePlan { layout, commands }
}

/// Single-quotes an argument for POSIX `sh` unless it consists only of
/// characters that never need quoting.
pub fn shell_quote(arg: &str) -> String {
    let safe = !arg.is_empty()
        && arg.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '/' | '=' | ':' | ',' | '+'));
    if safe {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

impl PipelinePlan {
    /// POSIX shell script running the plan. The output directory is created
    /// before the mapper runs.
    pub fn to_shell_script(&self) -> String {
        let mut out = String::from("#!/bin/sh\nset -eu\n");
        out.push_str(&format!("mkdir -p {}\n", shell_quote(&self.layout.sparse)));
        for argv in &self.commands {
            let line: Vec<String> = argv.iter().map(|a| shell_quote(a)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}
