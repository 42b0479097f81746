#![allow(dead_code)]

use proptest::prelude::*;
use vq3d_core::geometry::{Intrinsics, PixelPoint, Rotation, SimilarityTransform, Vec3};
use vq3d_core::{Direction, RigidPose};

pub fn vec3(range: f64) -> impl Strategy<Value = Vec3> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

pub fn rotation() -> impl Strategy<Value = Rotation> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("normalizable", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
        .prop_map(|(w, x, y, z)| vq3d_core::geometry::rotation_from_wxyz(w, x, y, z).unwrap())
}

pub fn rigid_pose() -> impl Strategy<Value = RigidPose> {
    (rotation(), vec3(10.0), any::<bool>()).prop_map(|(r, t, c2w)| {
        RigidPose::new(r, t, if c2w { Direction::CameraToWorld } else { Direction::WorldToCamera })
    })
}

pub fn similarity() -> impl Strategy<Value = SimilarityTransform> {
    (0.5..2.0f64, rotation(), vec3(10.0)).prop_map(|(s, r, t)| SimilarityTransform::new(s, r, t).unwrap())
}

pub fn intrinsics() -> impl Strategy<Value = Intrinsics> {
    (50.0..1000.0f64, 50.0..1000.0f64, 64u32..2000, 64u32..2000, 0.1..0.9f64, 0.1..0.9f64).prop_map(
        |(fx, fy, w, h, a, b)| Intrinsics::new(fx, fy, a * f64::from(w), b * f64::from(h), w, h).unwrap(),
    )
}

pub fn pixel_in(k: &Intrinsics, a: f64, b: f64) -> PixelPoint {
    PixelPoint::new(a * f64::from(k.width()), b * f64::from(k.height()))
}

pub fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
    (a - b).norm() <= tol * (1.0 + b.norm())
}
