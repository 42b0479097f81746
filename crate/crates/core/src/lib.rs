//! Geometry, registration, localization and metrics for visual-query 3D
//! localization in egocentric video.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the command-line
//! tool and all I/O live in the `vq3d` companion crate.
//!
//! Pipeline, in the order data flows:
//!
//! - [`colmap`]: reconstruction model types and the external SfM command plan.
//! - [`registration`]: aligning submap pose sets to world anchor poses.
//! - [`frames`]: sharpness scoring and response-track frame selection.
//! - [`localization`]: detection + depth + pose to a 3D displacement.
//! - [`evaluation`]: QwP, L2, angle, Succ* and Succ.
//! - [`synth`]: synthetic scenes with exact ground truth.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod colmap;
pub mod evaluation;
pub mod frames;
pub mod geometry;
pub mod localization;
pub mod registration;
pub mod synth;

pub use geometry::{Direction, FrameId, Intrinsics, PixelPoint, RigidPose, Rotation, SimilarityTransform, Vec3};
