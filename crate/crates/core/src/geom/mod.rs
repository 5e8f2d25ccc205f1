//! Rigid-body algebra and point-cloud utilities.
//!
//! Points and directions are [`Vec3`] in meters, rotations are unit
//! quaternions and poses are rotation + translation isometries. All
//! operations here are pure and safe to call from any thread.

mod camera;
mod cloud;
mod kabsch;
mod plane;
mod rotation;

pub use camera::{backproject, project, CameraIntrinsics, DepthImage};
pub use cloud::{bbox_diagonal, remove_statistical_outliers, scale_factor, voxel_downsample, PointCloud};
pub use kabsch::{kabsch_align, RigidFit};
pub use plane::{fit_plane_ransac, plane_alignment_transform, Plane, PlaneFitConfig};
pub use rotation::{
    canonical_quaternion, geodesic_distance, quaternion_wxyz, rodrigues_align, rotation_from_wxyz, slerp,
};

use thiserror::Error;

/// Point or direction in meters.
pub type Vec3 = nalgebra::Vector3<f64>;
/// Unit-quaternion rotation.
pub type Rotation = nalgebra::UnitQuaternion<f64>;
/// Rigid transform applied as `rotation * p + translation`.
pub type Pose = nalgebra::Isometry3<f64>;

/// Directions shorter than this are treated as degenerate.
pub const EPS_DIR: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("degenerate direction: norm {0:e} is below {EPS_DIR:e}")]
    DegenerateDirection(f64),
    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(&'static str),
    #[error("point count mismatch: {0} source vs {1} destination")]
    CountMismatch(usize, usize),
    #[error("empty result: {0}")]
    Empty(&'static str),
    #[error("zero bounding-box diagonal")]
    ZeroDiagonal,
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
}

/// Build a pose from rotation and translation parts.
pub fn pose(rotation: Rotation, translation: Vec3) -> Pose {
    Pose::from_parts(nalgebra::Translation3::from(translation), rotation)
}

/// Apply a pose to a point.
#[inline]
pub fn transform_point(p: &Pose, v: &Vec3) -> Vec3 {
    p.rotation * v + p.translation.vector
}

/// Centroid of a non-empty point slice.
pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::zeros(), |acc, p| acc + p);
    Some(sum / points.len() as f64)
}
