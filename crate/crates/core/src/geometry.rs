//! Pinhole camera, rigid pose and similarity-transform math.
//!
//! Every pose carries an explicit [`Direction`]. Model files store
//! world-to-camera extrinsics while unprojection into the world needs
//! camera-to-world, so conversions are always explicit calls
//! ([`RigidPose::to_camera_to_world`], [`RigidPose::to_world_to_camera`]) and
//! operations that need one convention check it with [`RigidPose::require`].

use core::fmt;

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

/// A 3D point or displacement, meters unless stated otherwise.
pub type Vec3 = Vector3<f64>;

/// Unit quaternion rotation.
pub type Rotation = UnitQuaternion<f64>;

/// Frame index inside a video clip.
pub type FrameId = u64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("expected a {expected} pose, got {found}")]
    WrongDirection { expected: Direction, found: Direction },
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
}

fn is_finite3(v: &Vec3) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Image coordinates in pixels, origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Pinhole intrinsics. Construct through [`Intrinsics::new`], which enforces
/// positive focal lengths and a principal point strictly inside the image.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "RawIntrinsics", into = "RawIntrinsics")
)]
pub struct Intrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[cfg(feature = "serde")]
impl TryFrom<RawIntrinsics> for Intrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        Intrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

#[cfg(feature = "serde")]
impl From<Intrinsics> for RawIntrinsics {
    fn from(k: Intrinsics) -> Self {
        RawIntrinsics { fx: k.fx, fy: k.fy, cx: k.cx, cy: k.cy, width: k.width, height: k.height }
    }
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        if !(fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("non-finite parameter"));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics("focal lengths must be positive"));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidIntrinsics("image size must be positive"));
        }
        if !(cx > 0.0 && cx < f64::from(width) && cy > 0.0 && cy < f64::from(height)) {
            return Err(GeometryError::InvalidIntrinsics("principal point outside the image"));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// `K^-1 [u, v, 1]^T`, the camera-frame ray through a pixel at unit depth.
    pub fn ray(&self, p: PixelPoint) -> Vec3 {
        Vec3::new((p.u - self.cx) / self.fx, (p.v - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, p: PixelPoint) -> bool {
        p.u >= 0.0 && p.v >= 0.0 && p.u < f64::from(self.width) && p.v < f64::from(self.height)
    }
}

/// Back-projects a pixel at metric depth into camera coordinates: `d K^-1 [u, v, 1]^T`.
pub fn unproject(p: PixelPoint, depth: f64, k: &Intrinsics) -> Result<Vec3, GeometryError> {
    if !(p.u.is_finite() && p.v.is_finite() && depth.is_finite()) {
        return Err(GeometryError::Domain("non-finite pixel or depth"));
    }
    if depth <= 0.0 {
        return Err(GeometryError::Domain("depth must be positive"));
    }
    Ok(k.ray(p) * depth)
}

/// Projects a camera-frame point, returning the pixel and its depth.
pub fn project(x: &Vec3, k: &Intrinsics) -> Result<(PixelPoint, f64), GeometryError> {
    if !is_finite3(x) {
        return Err(GeometryError::Domain("non-finite point"));
    }
    if x.z <= 0.0 {
        return Err(GeometryError::BehindCamera { z: x.z });
    }
    let u = k.fx * x.x / x.z + k.cx;
    let v = k.fy * x.y / x.z + k.cy;
    Ok((PixelPoint { u, v }, x.z))
}

/// Which way a [`RigidPose`] maps points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Direction {
    CameraToWorld,
    WorldToCamera,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::CameraToWorld => Direction::WorldToCamera,
            Direction::WorldToCamera => Direction::CameraToWorld,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::CameraToWorld => "CameraToWorld",
            Direction::WorldToCamera => "WorldToCamera",
        })
    }
}

/// Builds a rotation from `(qw, qx, qy, qz)`, normalizing. Fails when the
/// quaternion is non-finite or has zero norm.
pub fn rotation_from_wxyz(qw: f64, qx: f64, qy: f64, qz: f64) -> Result<Rotation, GeometryError> {
    let q = Quaternion::new(qw, qx, qy, qz);
    let n = q.norm();
    if !n.is_finite() || n <= f64::EPSILON {
        return Err(GeometryError::Domain("quaternion is not normalizable"));
    }
    Ok(UnitQuaternion::new_unchecked(q / n))
}

/// `(qw, qx, qy, qz)` of a rotation.
pub fn rotation_to_wxyz(r: &Rotation) -> [f64; 4] {
    [r.w, r.i, r.j, r.k]
}

/// Angle in `[0, pi]` of the relative rotation between two orientations.
/// Invariant under the quaternion sign ambiguity of either argument.
pub fn rotation_geodesic_angle(a: &Rotation, b: &Rotation) -> f64 {
    let rel = a.inverse() * b;
    let v = rel.imag().norm();
    2.0 * libm::atan2(v, libm::fabs(rel.w))
}

/// Something that maps points from one coordinate system into another.
pub trait PointTransform {
    fn transform_point(&self, x: &Vec3) -> Vec3;
}

/// Rigid camera pose `x -> R x + t` tagged with its mapping direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Rotation,
    pub translation: Vec3,
    pub direction: Direction,
}

impl RigidPose {
    pub fn new(rotation: Rotation, translation: Vec3, direction: Direction) -> Self {
        Self { rotation, translation, direction }
    }

    pub fn identity(direction: Direction) -> Self {
        Self { rotation: Rotation::identity(), translation: Vec3::zeros(), direction }
    }

    /// The same physical pose expressed in the opposite direction.
    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self { rotation, translation: -(rotation * self.translation), direction: self.direction.flipped() }
    }

    pub fn to_direction(&self, direction: Direction) -> Self {
        if self.direction == direction {
            *self
        } else {
            self.inverse()
        }
    }

    pub fn to_camera_to_world(&self) -> Self {
        self.to_direction(Direction::CameraToWorld)
    }

    pub fn to_world_to_camera(&self) -> Self {
        self.to_direction(Direction::WorldToCamera)
    }

    /// Returns `self` if it has the requested direction, an error otherwise.
    pub fn require(&self, direction: Direction) -> Result<&Self, GeometryError> {
        if self.direction == direction {
            Ok(self)
        } else {
            Err(GeometryError::WrongDirection { expected: direction, found: self.direction })
        }
    }

    /// Camera center in world coordinates.
    pub fn camera_center(&self) -> Vec3 {
        self.to_camera_to_world().translation
    }

    /// Camera-to-world rotation.
    pub fn camera_orientation(&self) -> Rotation {
        self.to_camera_to_world().rotation
    }

    /// The pose's point mapping as a scale-1 similarity. Direction is dropped.
    pub fn to_transform(&self) -> SimilarityTransform {
        SimilarityTransform { scale: 1.0, rotation: self.rotation, translation: self.translation }
    }

    pub fn is_finite(&self) -> bool {
        is_finite3(&self.translation) && self.rotation.coords.iter().all(|c| c.is_finite())
    }
}

impl PointTransform for RigidPose {
    fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }
}

/// `x -> s R x + t`, mapping one coordinate system into another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    scale: f64,
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl SimilarityTransform {
    pub fn new(scale: f64, rotation: Rotation, translation: Vec3) -> Result<Self, GeometryError> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(GeometryError::Domain("scale must be positive and finite"));
        }
        if !is_finite3(&translation) {
            return Err(GeometryError::Domain("non-finite translation"));
        }
        Ok(Self { scale, rotation, translation })
    }

    pub fn rigid(rotation: Rotation, translation: Vec3) -> Self {
        Self { scale: 1.0, rotation, translation }
    }

    pub fn identity() -> Self {
        Self::rigid(Rotation::identity(), Vec3::zeros())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `self ∘ rhs`: applies `rhs` first.
    pub fn compose(&self, rhs: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * rhs.scale,
            rotation: self.rotation * rhs.rotation,
            translation: self.scale * (self.rotation * rhs.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rotation = self.rotation.inverse();
        let scale = 1.0 / self.scale;
        SimilarityTransform { scale, rotation, translation: -(scale * (rotation * self.translation)) }
    }

    /// Re-expresses a camera pose in the target system: the camera center is
    /// mapped through the transform and the orientation is rotated by `R`.
    /// The result keeps the input's direction.
    pub fn apply_to_pose(&self, pose: &RigidPose) -> RigidPose {
        let c2w = pose.to_camera_to_world();
        let mapped = RigidPose {
            rotation: self.rotation * c2w.rotation,
            translation: self.transform_point(&c2w.translation),
            direction: Direction::CameraToWorld,
        };
        mapped.to_direction(pose.direction)
    }
}

impl PointTransform for SimilarityTransform {
    fn transform_point(&self, x: &Vec3) -> Vec3 {
        self.scale * (self.rotation * x) + self.translation
    }
}
