//! Closed-loop action synthesis from a keyframe plan.
//!
//! Each iteration observes the scene, finds the plan step whose relation set
//! matches it, re-anchors the demonstrated motion of that step to the
//! observed objects, and turns the result into end-effector actions.

mod actions;
mod endpoints;
mod optimize;
mod run;

pub use actions::{attach_grip_commands, grasp_heuristic, se3_from_pose_trajectory, ActionStep, Grip};
pub use endpoints::{
    rollout_end_pose_rgb, rollout_endpoints_rgbd, Convention, DemoPoses, KeypointEndpoints, RgbdEndpoints,
};
pub use optimize::{keypoint_rmse, optimize_se3_sequence, OptimizerConfig, OptimizerMode};
pub use run::{
    run_policy, synthesize_segment, Environment, ExecutionReport, Outcome, OutcomeClass, Trace, TraceRecord,
    TRACE_FORMAT,
};

use crate::geom::{plane_alignment_transform, transform_point, Plane, PointCloud, Pose};
use crate::oog::{assemble, HandInput, NodeRef, ObjectNode, ObjectType, Oog, Plan, Relation, RelationSet};
use crate::register::{RegisterError, RegistrationConfig};
use crate::tracks::CaptureMode;
use crate::warp::WarpError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("observed relations {0} match no remaining plan step")]
    UnrecognizedState(String),
    #[error("object `{0}` is not observed")]
    MissingObject(String),
    #[error("no object moves or changes relations in this step")]
    NoTarget,
    #[error("ambiguous target: `{first}` and `{second}` move at nearly the same speed")]
    AmbiguousTarget { first: String, second: String },
    #[error("no reference object: only hand relations of `{0}` change")]
    NoReference(String),
    #[error("registration of `{object}` failed: {source}")]
    Registration { object: String, source: RegisterError },
    #[error("keypoints are collinear or too few to fix a rigid motion")]
    CollinearKeypoints,
    #[error("keypoint trajectories are too short or differ in length")]
    TrajectoryMismatch,
    #[error("a grasp is required but the plan carries no grasp points")]
    MissingGraspData,
    #[error("object `{0}` has no pose or pose trajectory")]
    MissingPose(String),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error("invalid policy setting: {0}")]
    Config(String),
}

/// Settings for one policy episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub convention: Convention,
    pub registration: RegistrationConfig,
    pub optimizer: OptimizerConfig,
    /// Plan segments the episode may execute before giving up.
    pub step_budget: usize,
    /// Snap the last transport pose so the target's keypoints land on their
    /// goal positions, absorbing per-step optimizer drift.
    pub terminal_alignment: bool,
    /// meters above the grasp pose to approach from
    pub approach_height: f64,
    /// meters to lift after releasing
    pub retreat_height: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            convention: Convention::NextKeyframe,
            registration: RegistrationConfig::default(),
            optimizer: OptimizerConfig::default(),
            step_budget: 10,
            terminal_alignment: true,
            approach_height: 0.1,
            retreat_height: 0.1,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<(), PolicyError> {
        self.optimizer.validate()?;
        let r = &self.registration;
        if !(r.distance_threshold.is_finite() && r.distance_threshold > 0.0) || r.max_iterations == 0 {
            return Err(PolicyError::Config("registration threshold and iterations must be positive".into()));
        }
        if !(self.approach_height >= 0.0 && self.retreat_height >= 0.0) {
            return Err(PolicyError::Config("approach and retreat heights must be >= 0".into()));
        }
        Ok(())
    }
}

/// One object as currently perceived.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedObject {
    pub id: String,
    pub name: String,
    pub object_type: ObjectType,
    pub cloud: PointCloud,
    /// Estimated 6-DOF pose (RGB captures).
    pub pose: Option<Pose>,
}

/// What the robot perceives before choosing its next actions.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub objects: Vec<ObservedObject>,
    pub hand: Option<HandInput>,
    pub end_effector: Pose,
    /// Table plane in the observation frame; `None` means the frame is
    /// already z-up with the table at `z = 0`.
    pub plane: Option<Plane>,
}

impl Observation {
    pub fn object(&self, id: &str) -> Option<&ObservedObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Transform taking observation coordinates to the plane-aligned frame.
    pub fn alignment(&self) -> Pose {
        self.plane.as_ref().map(plane_alignment_transform).unwrap_or_else(Pose::identity)
    }

    /// The same observation expressed in the plane-aligned frame.
    pub fn aligned(&self) -> Observation {
        let t = self.alignment();
        Observation {
            objects: self
                .objects
                .iter()
                .map(|o| ObservedObject { cloud: o.cloud.transformed(&t), pose: o.pose.map(|p| t * p), ..o.clone() })
                .collect(),
            hand: self.hand.as_ref().map(|h| HandInput {
                fingertips: h.fingertips.iter().map(|p| transform_point(&t, p)).collect(),
                closed: h.closed,
            }),
            end_effector: t * self.end_effector,
            plane: None,
        }
    }
}

/// Progress through the plan within one episode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyState {
    pub cursor: usize,
    pub budget_remaining: usize,
}

impl PolicyState {
    pub fn new(budget: usize) -> Self {
        Self { cursor: 0, budget_remaining: budget }
    }
}

/// Result of looking up the observed state in the plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanMatch {
    /// Execute the step from `G_l` to `G_{l+1}`.
    Segment(usize),
    TaskComplete,
}

/// Contact graph of the current scene. No point nodes and an empty grasp
/// node; the hand participates only through its contact edges.
pub fn generate_observation_oog(obs: &Observation, epsilon: f64) -> Result<Oog, PolicyError> {
    let obs = obs.aligned();
    let objects = obs
        .objects
        .iter()
        .map(|o| ObjectNode {
            id: o.id.clone(),
            name: o.name.clone(),
            object_type: o.object_type,
            cloud: o.cloud.clone(),
            model_vertices: None,
            pose: o.pose,
        })
        .collect();
    let mut g = assemble(0, objects, obs.hand.as_ref(), Vec::new(), epsilon).map_err(|e| match e {
        crate::oog::OogError::MissingObject(id) => PolicyError::MissingObject(id),
        other => PolicyError::Config(other.to_string()),
    })?;
    g.grasp = Default::default();
    Ok(g)
}

/// Earliest plan step at or after the cursor with the observed relation
/// set. Matching the final graph completes the task.
pub fn find_matching_oog(obs: &Oog, plan: &Plan, state: &mut PolicyState) -> Result<PlanMatch, PolicyError> {
    let want = obs.relation_set();
    let l = (state.cursor..plan.oogs.len())
        .find(|&l| plan.oogs[l].relation_set() == want)
        .ok_or_else(|| PolicyError::UnrecognizedState(crate::oog::format_relations(&want)))?;
    state.cursor = l;
    Ok(if l == plan.last_index() { PlanMatch::TaskComplete } else { PlanMatch::Segment(l) })
}

/// Relations present in exactly one of the two sets.
pub(crate) fn relation_delta(a: &Oog, b: &Oog) -> RelationSet {
    let (ra, rb) = (a.relation_set(), b.relation_set());
    ra.symmetric_difference(&rb).cloned().collect()
}

/// The object that moves between `G_l` and `G_{l+1}`.
///
/// RGB-D steps pick the fastest object by mean point-node speed and reject
/// near ties (within 10%). RGB steps pick the manipulate-labelled object
/// that takes part in the relation change.
pub fn identify_target_object(g0: &Oog, g1: &Oog, mode: CaptureMode) -> Result<String, PolicyError> {
    match mode {
        CaptureMode::Rgbd => {
            let mut speeds: Vec<(f64, &str)> =
                g0.objects.iter().map(|o| (g0.object_speed(&o.id), o.id.as_str())).collect();
            speeds.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
            let Some(&(top, id)) = speeds.first() else {
                return Err(PolicyError::NoTarget);
            };
            if top <= 0.0 {
                return Err(PolicyError::NoTarget);
            }
            if let Some(&(second, other)) = speeds.get(1) {
                if second >= 0.9 * top {
                    return Err(PolicyError::AmbiguousTarget { first: id.into(), second: other.into() });
                }
            }
            Ok(id.to_string())
        }
        CaptureMode::Rgb => {
            let delta = relation_delta(g0, g1);
            g0.objects
                .iter()
                .find(|o| o.object_type == ObjectType::Manipulate && delta.iter().any(|r| r.contains(&o.id)))
                .map(|o| o.id.clone())
                .ok_or(PolicyError::NoTarget)
        }
    }
}

/// The object whose contact with the target changes. Several candidates are
/// resolved by distance to the target at `G_{l+1}`.
pub fn identify_reference_object(g0: &Oog, g1: &Oog, target: &str) -> Result<String, PolicyError> {
    let candidates: std::collections::BTreeSet<String> = relation_delta(g0, g1)
        .iter()
        .filter(|r| !r.involves_hand() && r.contains(target))
        .filter_map(|r| r.other(target).and_then(NodeRef::as_object).map(str::to_owned))
        .collect();
    let target_cloud = g1.object(target).map(|o| &o.cloud);
    let distance = |id: &str| -> f64 {
        match (target_cloud, g1.object(id)) {
            (Some(t), Some(o)) => crate::oog::min_distance(t, &o.cloud).unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        }
    };
    // BTreeSet order makes the lowest id win exact ties
    candidates
        .into_iter()
        .map(|id| (distance(&id), id))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, id)| id)
        .ok_or_else(|| PolicyError::NoReference(target.to_string()))
}

/// Objects whose hand relation is present in `g1` but not in `g0`
/// (`gained = true`) or the other way round.
pub(crate) fn hand_changes(g0: &Oog, g1: &Oog, gained: bool) -> Vec<String> {
    let (from, to) = if gained { (g0, g1) } else { (g1, g0) };
    let have = from.relation_set();
    to.relation_set()
        .difference(&have)
        .filter(|r| r.involves_hand())
        .filter_map(|r| r.0.as_object().map(str::to_owned))
        .collect()
}

pub(crate) fn holds(set: &RelationSet, id: &str) -> bool {
    set.contains(&Relation::with_hand(id))
}

#[cfg(test)]
mod tests;
