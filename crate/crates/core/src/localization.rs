//! Lifting a 2D detection with depth into a world point and expressing it as
//! a displacement from the query camera.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::frames::{select_track_frame, Aggregation, BoundingBox, FrameError, ResponseTrack};
use crate::geometry::{unproject, Direction, FrameId, GeometryError, Intrinsics, PixelPoint, PointTransform, RigidPose, Vec3};
use crate::registration::PoseSet;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LocalizationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no depth for frame {frame} at ({u}, {v})")]
    MissingData { frame: FrameId, u: f64, v: f64 },
    #[error("invalid query: {0}")]
    InvalidQuery(String),
}

/// "Where did I last see this object?" for one clip.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct VisualQuery {
    pub query_id: String,
    pub clip_id: String,
    pub query_frame: FrameId,
    pub object_id: String,
    /// Path of the object crop. Carried through, never read.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub crop_path: Option<String>,
    pub track: ResponseTrack,
    /// Annotated object position in world coordinates, meters.
    pub gt_world: Vec3,
}

impl VisualQuery {
    pub fn validate(&self) -> Result<(), LocalizationError> {
        if (self.track.first_frame()..=self.track.last_frame()).contains(&self.query_frame) {
            return Err(LocalizationError::InvalidQuery(alloc::format!(
                "{}: query frame {} lies inside the response track",
                self.query_id,
                self.query_frame
            )));
        }
        if !self.gt_world.iter().all(|c| c.is_finite()) {
            return Err(LocalizationError::InvalidQuery(alloc::format!("{}: non-finite ground truth", self.query_id)));
        }
        Ok(())
    }
}

/// Dense per-frame metric depth, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthGrid {
    pub frame_id: FrameId,
    pub width: u32,
    pub height: u32,
    pub values: Vec<f32>,
}

impl DepthGrid {
    /// Zero-filled grid; zero means "no depth".
    pub fn empty(frame_id: FrameId, width: u32, height: u32) -> Self {
        Self { frame_id, width, height, values: alloc::vec![0.0; width as usize * height as usize] }
    }

    fn index(&self, p: PixelPoint) -> Option<usize> {
        if !(p.u >= 0.0 && p.v >= 0.0 && p.u < f64::from(self.width) && p.v < f64::from(self.height)) {
            return None;
        }
        // Pixel (c, r) covers [c, c + 1) x [r, r + 1).
        let (c, r) = (libm::floor(p.u) as usize, libm::floor(p.v) as usize);
        Some(r * self.width as usize + c)
    }

    pub fn set(&mut self, p: PixelPoint, value: f32) -> bool {
        match self.index(p) {
            Some(i) => {
                self.values[i] = value;
                true
            }
            None => false,
        }
    }

    /// Nearest-pixel lookup. `None` outside the grid or where depth is not positive.
    pub fn sample(&self, p: PixelPoint) -> Option<f64> {
        let v = f64::from(*self.values.get(self.index(p)?)?);
        (v.is_finite() && v > 0.0).then_some(v)
    }
}

/// Per-frame depth lookup.
pub trait DepthSource {
    fn depth(&self, frame: FrameId, p: PixelPoint) -> Option<f64>;
}

impl DepthSource for BTreeMap<FrameId, DepthGrid> {
    fn depth(&self, frame: FrameId, p: PixelPoint) -> Option<f64> {
        self.get(&frame)?.sample(p)
    }
}

/// `P_f d K^-1 [u, v, 1]^T` with `(u, v)` the box center. `pose_world` must
/// be camera-to-world.
pub fn predict_world(bbox: &BoundingBox, depth: f64, k: &Intrinsics, pose_world: &RigidPose) -> Result<Vec3, LocalizationError> {
    let pose = pose_world.require(Direction::CameraToWorld)?;
    let x_cam = unproject(bbox.center(), depth, k)?;
    Ok(pose.transform_point(&x_cam))
}

/// World point expressed in the query camera's frame (camera-to-world pose).
pub fn predict_query_vec(pred_world: &Vec3, query_pose_world: &RigidPose) -> Result<Vec3, LocalizationError> {
    let pose = query_pose_world.require(Direction::CameraToWorld)?;
    Ok(pose.inverse().transform_point(pred_world))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(deny_unknown_fields))]
pub struct QueryResult {
    pub query_id: String,
    pub has_pose: bool,
    pub pred_vec_world: Option<Vec3>,
    pub pred_vec_q: Option<Vec3>,
    /// Ground truth in the estimated query-camera frame.
    pub gt_vec_q: Option<Vec3>,
    pub used_frames: Vec<FrameId>,
    pub aggregation: Aggregation,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub reason: Option<String>,
}

impl QueryResult {
    fn unposed(q: &VisualQuery, mode: Aggregation, reason: &str) -> Self {
        Self {
            query_id: q.query_id.clone(),
            has_pose: false,
            pred_vec_world: None,
            pred_vec_q: None,
            gt_vec_q: None,
            used_frames: Vec::new(),
            aggregation: mode,
            reason: Some(reason.to_string()),
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Combines per-frame predictions. `Last` takes the final entry; `Median`
/// is component-wise in whatever coordinates the points are given.
pub fn aggregate(points: &[Vec3], mode: Aggregation) -> Option<Vec3> {
    let last = *points.last()?;
    Some(match mode {
        Aggregation::Last => last,
        Aggregation::Average => points.iter().sum::<Vec3>() / points.len() as f64,
        Aggregation::Median => {
            let axis = |i: usize| median(&mut points.iter().map(|p| p[i]).collect::<Vec<_>>());
            Vec3::new(axis(0), axis(1), axis(2))
        }
    })
}

/// Runs the full per-query pipeline. Never fails: missing poses or depth
/// produce an unposed result with a reason.
pub fn localize_query(
    q: &VisualQuery,
    posed: &PoseSet,
    depths: &impl DepthSource,
    k: &Intrinsics,
    mode: Aggregation,
) -> QueryResult {
    if let Err(e) = q.validate() {
        return QueryResult::unposed(q, mode, &e.to_string());
    }
    let Some(query_pose) = posed.get(q.query_frame).map(RigidPose::to_camera_to_world) else {
        return QueryResult::unposed(q, mode, "query frame has no pose");
    };
    let selection = match select_track_frame(&q.track, &posed.frame_set(), mode) {
        Ok(s) => s,
        Err(FrameError::NoPose) => return QueryResult::unposed(q, mode, "no response-track frame has a pose"),
        Err(e) => return QueryResult::unposed(q, mode, &e.to_string()),
    };
    let mut points = Vec::with_capacity(selection.frames.len());
    for &frame in &selection.frames {
        let tf = q.track.get(frame).expect("selected frames come from the track");
        let pose = posed.get(frame).expect("selected frames are posed").to_camera_to_world();
        let center = tf.bbox.center();
        let Some(d) = depths.depth(frame, center) else {
            let e = LocalizationError::MissingData { frame, u: center.u, v: center.v };
            return QueryResult::unposed(q, mode, &e.to_string());
        };
        match predict_world(&tf.bbox, d, k, &pose) {
            Ok(p) => points.push(p),
            Err(e) => return QueryResult::unposed(q, mode, &e.to_string()),
        }
    }
    let to_query = |p: &Vec3| predict_query_vec(p, &query_pose).expect("query pose is camera-to-world");
    // Aggregate in query-camera axes so the component-wise median does not
    // depend on how the world frame happens to be oriented.
    let in_query: Vec<Vec3> = points.iter().map(to_query).collect();
    let pred_q = aggregate(&in_query, mode).expect("selection is non-empty");
    QueryResult {
        query_id: q.query_id.clone(),
        has_pose: true,
        pred_vec_world: Some(query_pose.transform_point(&pred_q)),
        pred_vec_q: Some(pred_q),
        gt_vec_q: Some(to_query(&q.gt_world)),
        used_frames: selection.frames,
        aggregation: mode,
        reason: None,
    }
}
