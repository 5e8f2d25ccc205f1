//! Where the target should start and end in the observed scene.

use super::{Observation, PolicyError};
use crate::geom::{transform_point, Pose, Vec3};
use crate::oog::{FeatureTrajectory, Oog};
use crate::register::{ransac_register, RegistrationConfig, RegistrationResult};
use serde::{Deserialize, Serialize};

/// Which demonstrated target pose anchors the RGB end-pose composition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Convention {
    /// Target and reference poses at the segment's first keyframe.
    Literal,
    /// Target and reference poses at the segment's last keyframe.
    #[default]
    NextKeyframe,
}

/// Demonstrated poses of target and reference at both ends of a segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DemoPoses {
    pub target_start: Pose,
    pub target_end: Pose,
    pub reference_start: Pose,
    pub reference_end: Pose,
}

/// Target end pose that keeps the demonstrated target-to-reference offset:
/// `o_ref * inv(demo_ref) * demo_target`.
pub fn rollout_end_pose_rgb(demo: &DemoPoses, observed_reference: &Pose, convention: Convention) -> Pose {
    let (target, reference) = match convention {
        Convention::Literal => (demo.target_start, demo.reference_start),
        Convention::NextKeyframe => (demo.target_end, demo.reference_end),
    };
    observed_reference * reference.inverse() * target
}

#[derive(Clone, Debug, PartialEq)]
pub struct KeypointEndpoints {
    pub keypoint_id: Option<u32>,
    /// Demonstrated trajectory over the segment.
    pub demo: Vec<Vec3>,
    pub start: Vec3,
    pub end: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RgbdEndpoints {
    /// Demo target at `G_l` onto the observed target.
    pub start: RegistrationResult,
    /// Demo reference at `G_{l+1}` onto the observed reference.
    pub goal: RegistrationResult,
    pub keypoints: Vec<KeypointEndpoints>,
}

/// Register a plan object's cloud onto its observed counterpart.
pub(crate) fn register_object(
    g: &Oog,
    obs: &Observation,
    id: &str,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult, PolicyError> {
    let demo = g.object(id).ok_or_else(|| PolicyError::MissingObject(id.into()))?;
    let seen = obs.object(id).ok_or_else(|| PolicyError::MissingObject(id.into()))?;
    ransac_register(&demo.cloud, &seen.cloud, cfg)
        .map_err(|source| PolicyError::Registration { object: id.into(), source })
}

/// Start and goal of every target keypoint: the demonstrated first sample
/// carried by the target registration, the last one by the reference
/// registration at the next keyframe. `obs` must be plane-aligned.
pub fn rollout_endpoints_rgbd(
    g0: &Oog,
    g1: &Oog,
    obs: &Observation,
    target: &str,
    reference: &str,
    cfg: &RegistrationConfig,
) -> Result<RgbdEndpoints, PolicyError> {
    let start = register_object(g0, obs, target, cfg)?;
    let goal = register_object(g1, obs, reference, cfg)?;
    let keypoints = g0
        .points_of(target)
        .map(|p| match &p.trajectory {
            FeatureTrajectory::Points(v) if v.len() >= 2 => Ok(KeypointEndpoints {
                keypoint_id: p.keypoint_id,
                start: transform_point(&start.transform, &v[0]),
                end: transform_point(&goal.transform, &v[v.len() - 1]),
                demo: v.clone(),
            }),
            _ => Err(PolicyError::TrajectoryMismatch),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RgbdEndpoints { start, goal, keypoints })
}
