//! Kinematic tabletop: rigid objects resting on `z = 0`, a floating
//! end effector and a binary gripper.

use super::goal::{check_goal, GoalSpec};
use super::shapes::Shape;
use super::SimError;
use crate::geom::{kabsch_align, pose, PointCloud, Pose, Rotation, Vec3};
use crate::oog::{min_distance, HandInput, ObjectType, RelationSet};
use crate::policy::{
    generate_observation_oog, ActionStep, Environment, ExecutionReport, Grip, Observation, ObservedObject,
};
use crate::spatial::SpatialIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimObject {
    pub id: String,
    pub name: String,
    pub object_type: ObjectType,
    pub shape: Shape,
    #[serde(with = "crate::io::pose")]
    pub pose: Pose,
}

impl SimObject {
    /// Surface samples in the world frame.
    pub fn cloud(&self) -> PointCloud {
        self.shape.model().transformed(&self.pose)
    }
}

/// An object carried by the closed gripper.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attachment {
    pub object: String,
    /// Object pose in the end-effector frame.
    #[serde(with = "crate::io::pose")]
    pub offset: Pose,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimScene {
    pub objects: Vec<SimObject>,
    /// Pose of the tool centre point, between the fingertips.
    #[serde(with = "crate::io::pose")]
    pub end_effector: Pose,
    #[serde(default)]
    pub grip_closed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attached: Option<Attachment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Standard deviation of per-point observation noise, meters.
    pub noise: f64,
    /// A close grasps the nearest object within this distance of the TCP.
    pub epsilon_grasp: f64,
    /// Carried objects deeper than this below the table count as a failure.
    pub penetration_tolerance: f64,
    /// Horizontal radius within which a point supports a settling object.
    pub support_radius: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { noise: 0.0, epsilon_grasp: 0.02, penetration_tolerance: 0.01, support_radius: 0.006 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.noise >= 0.0
            && self.noise.is_finite()
            && self.epsilon_grasp > 0.0
            && self.penetration_tolerance >= 0.0
            && self.support_radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::Invalid(format!("bad simulator settings {self:?}")))
        }
    }
}

pub const SCENE_FORMAT: &str = "oog-scene";

/// Home pose of the end effector: 40 cm above the origin, pointing down.
pub fn home_pose() -> Pose {
    pose(Rotation::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI), Vec3::new(0.0, 0.0, 0.4))
}

impl SimScene {
    pub fn new(objects: Vec<SimObject>) -> Self {
        Self { objects, end_effector: home_pose(), grip_closed: false, attached: None }
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json(SCENE_FORMAT, self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SimError> {
        let s: SimScene = crate::io::from_json(SCENE_FORMAT, bytes)?;
        s.validate()?;
        Ok(s)
    }

    pub fn object(&self, id: &str) -> Option<&SimObject> {
        self.objects.iter().find(|o| o.id == id)
    }

    fn index_of(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut seen = HashSet::new();
        for o in &self.objects {
            if o.id.is_empty() || o.id == crate::oog::HAND_ID || !seen.insert(o.id.as_str()) {
                return Err(SimError::Invalid(format!("object id `{}` is empty, reserved or repeated", o.id)));
            }
        }
        if let Some(a) = &self.attached {
            if self.object(&a.object).is_none() {
                return Err(SimError::UnknownObject(a.object.clone()));
            }
            if !self.grip_closed {
                return Err(SimError::Invalid("an attached object requires a closed grip".into()));
            }
        }
        Ok(())
    }

    /// The scene moved rigidly by `q`. Only table-preserving motions (yaw
    /// and horizontal translation) keep the result physically valid.
    pub fn transformed(&self, q: &Pose) -> SimScene {
        let mut out = self.clone();
        for o in &mut out.objects {
            o.pose = q * o.pose;
        }
        out.end_effector = q * out.end_effector;
        out
    }

    fn tcp(&self) -> Vec3 {
        self.end_effector.translation.vector
    }

    /// What the robot sees: every object cloud with Gaussian noise, a pose
    /// estimate fitted to it, and the fingertips.
    pub fn observe(&self, noise: f64, rng: &mut ChaCha8Rng) -> Observation {
        let normal = Normal::new(0.0, noise.max(0.0)).expect("finite noise");
        let mut jitter = |p: Vec3| {
            if noise > 0.0 {
                p + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
            } else {
                p
            }
        };
        let objects: Vec<ObservedObject> = self
            .objects
            .iter()
            .map(|o| {
                let model = o.shape.model();
                let cloud = PointCloud::new(o.cloud().points.into_iter().map(&mut jitter).collect());
                let pose = kabsch_align(&model.points, &cloud.points).ok().map(|f| f.pose);
                ObservedObject { id: o.id.clone(), name: o.name.clone(), object_type: o.object_type, cloud, pose }
            })
            .collect();
        let tcp = self.tcp();
        let fingertips = match self.attached.as_ref().and_then(|a| objects.iter().find(|o| o.id == a.object)) {
            Some(held) => {
                let index = SpatialIndex::new(&held.cloud.points);
                index.knn(&tcp, 2).into_iter().map(|(i, _)| held.cloud.points[i]).collect()
            }
            None => vec![tcp],
        };
        Observation {
            objects,
            hand: Some(HandInput { fingertips, closed: self.grip_closed }),
            end_effector: self.end_effector,
            plane: None,
        }
    }

    /// Contact relations of the noise-free scene.
    pub fn relations(&self, epsilon: f64) -> RelationSet {
        let obs = self.observe(0.0, &mut ChaCha8Rng::seed_from_u64(0));
        generate_observation_oog(&obs, epsilon).map(|g| g.relation_set()).unwrap_or_default()
    }

    /// Run `actions` in order: teleport the end effector, carry any attached
    /// object, then apply the grip command.
    pub fn execute(&mut self, actions: &[ActionStep], cfg: &SimConfig) -> ExecutionReport {
        let mut report = ExecutionReport::default();
        for step in actions {
            self.end_effector = step.end_effector;
            if let Some(a) = self.attached.clone() {
                let i = self.index_of(&a.object).expect("validated attachment");
                self.objects[i].pose = self.end_effector * a.offset;
                let lowest = lowest_z(&self.objects[i].cloud());
                if lowest < -cfg.penetration_tolerance {
                    report.penetration = true;
                }
                if lowest < 0.0 {
                    self.objects[i].pose.translation.vector.z -= lowest;
                }
            }
            match step.grip {
                Grip::Hold => {}
                Grip::Close => {
                    self.grip_closed = true;
                    if self.attached.is_none() {
                        match self.nearest_to_tcp() {
                            Some((i, d)) if d <= cfg.epsilon_grasp => {
                                let offset = self.end_effector.inverse() * self.objects[i].pose;
                                self.attached = Some(Attachment { object: self.objects[i].id.clone(), offset });
                            }
                            _ => report.missed_grasp = true,
                        }
                    }
                }
                Grip::Open => {
                    self.grip_closed = false;
                    if let Some(a) = self.attached.take() {
                        let i = self.index_of(&a.object).expect("validated attachment");
                        self.settle(i, cfg.support_radius);
                    }
                }
            }
        }
        report
    }

    fn nearest_to_tcp(&self) -> Option<(usize, f64)> {
        let tcp = PointCloud::new(vec![self.tcp()]);
        self.objects
            .iter()
            .enumerate()
            .filter_map(|(i, o)| min_distance(&tcp, &o.cloud()).map(|d| (i, d)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Drop object `i` straight down until it rests on the table or on
    /// another object. Points of other objects up to a centimeter above a
    /// point still count as support, so a slightly sunken object is lifted
    /// back onto the surface it sank into.
    pub fn settle(&mut self, i: usize, support_radius: f64) {
        let cloud = self.objects[i].cloud();
        let others: Vec<Vec3> =
            self.objects.iter().enumerate().filter(|&(j, _)| j != i).flat_map(|(_, o)| o.cloud().points).collect();
        let flat: Vec<Vec3> = others.iter().map(|p| Vec3::new(p.x, p.y, 0.0)).collect();
        let index = (!flat.is_empty()).then(|| SpatialIndex::new(&flat));
        let gap = cloud
            .points
            .iter()
            .map(|p| {
                let support = index
                    .as_ref()
                    .map(|ix| {
                        ix.within(&Vec3::new(p.x, p.y, 0.0), support_radius)
                            .into_iter()
                            .map(|(j, _)| others[j].z)
                            .filter(|&z| z <= p.z + 0.01)
                            .fold(0.0f64, f64::max)
                    })
                    .unwrap_or(0.0);
                p.z - support
            })
            .fold(f64::INFINITY, f64::min);
        if gap.is_finite() {
            self.objects[i].pose.translation.vector.z -= gap;
        }
    }
}

fn lowest_z(c: &PointCloud) -> f64 {
    c.points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min)
}

/// A scene driven by policy actions, with seeded observation noise.
#[derive(Clone, Debug)]
pub struct SimEnvironment {
    pub scene: SimScene,
    pub goal: GoalSpec,
    pub cfg: SimConfig,
    pub epsilon_contact: f64,
    rng: ChaCha8Rng,
}

impl SimEnvironment {
    pub fn new(scene: SimScene, goal: GoalSpec, cfg: SimConfig, epsilon_contact: f64, seed: u64) -> Self {
        Self { scene, goal, cfg, epsilon_contact, rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Environment for SimEnvironment {
    fn observe(&mut self) -> Observation {
        let seed = self.rng.random();
        self.scene.observe(self.cfg.noise, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn execute(&mut self, actions: &[ActionStep]) -> ExecutionReport {
        self.scene.execute(actions, &self.cfg)
    }

    fn goal_satisfied(&self) -> bool {
        check_goal(&self.scene, &self.goal, self.epsilon_contact)
    }
}
