//! Projected Huber distribution: a log-concave density over 3D positions seen
//! by a pinhole camera, with independent spread in the image plane and in
//! depth.
//!
//! The core is generic over [`Real`] (`f32` or `f64`); the aliases below fix
//! the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distribution;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod linalg;
pub mod mapping;
pub mod scalar;
pub mod solver;
pub mod special;

pub use distribution::{DistParams, Moments, Normalizers, ProjectedHuber};
pub use error::{Error, Result};
pub use fusion::{fuse, nll_world, plane_mle, CameraPose, FusionResult, Plane, ViewEstimate};
pub use linalg::{Mat2, Mat3, Point3, Vec2, Vec3};
pub use mapping::{
    activation, compute_stats, denormalize_obs, loss, loss_from_raw, normalize_obs,
    normalized_to_world, stats_from_ranges, CameraIntrinsics, DatasetStats, NormalizedObservation,
    NormalizedParams, RawOutput,
};
pub use scalar::Real;

pub type DistParams64 = DistParams<f64>;
pub type ProjectedHuber64 = ProjectedHuber<f64>;
pub type Point3f64 = Point3<f64>;
pub type CameraIntrinsics64 = CameraIntrinsics<f64>;
pub type DatasetStats64 = DatasetStats<f64>;
pub type NormalizedObservation64 = NormalizedObservation<f64>;
pub type NormalizedParams64 = NormalizedParams<f64>;
pub type RawOutput64 = RawOutput<f64>;
pub type CameraPose64 = CameraPose<f64>;
pub type ViewEstimate64 = ViewEstimate<f64>;
pub type Plane64 = Plane<f64>;
