//! Sparse task rewards: required contacts plus optional pose predicates.

use super::scene::SimScene;
use super::SimError;
use crate::geom::{transform_point, Vec3};
use crate::oog::{NodeRef, Relation};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PosePredicate {
    /// The object's up axis leans at least `min_degrees` from vertical.
    Tilt { object: String, min_degrees: f64 },
    /// A point fixed to `object` lies within `radius` (horizontally) of the
    /// container's vertical axis and above its base.
    Over {
        object: String,
        #[serde(with = "crate::io::vec3")]
        point: Vec3,
        container: String,
        radius: f64,
    },
}

pub const GOAL_FORMAT: &str = "oog-goal";

/// Relations that must all hold at the end of an episode, and predicates
/// that must all be true.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalSpec {
    pub relations: Vec<Relation>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicates: Vec<PosePredicate>,
}

impl GoalSpec {
    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json(GOAL_FORMAT, self)
    }

    /// Parse a goal file; check it against a scene with [`GoalSpec::validate`].
    pub fn from_json(bytes: &[u8]) -> Result<Self, SimError> {
        Ok(crate::io::from_json(GOAL_FORMAT, bytes)?)
    }

    pub fn validate(&self, scene: &SimScene) -> Result<(), SimError> {
        if self.relations.is_empty() && self.predicates.is_empty() {
            return Err(SimError::Invalid("goal has no relations or predicates".into()));
        }
        let known = |n: &NodeRef| n.as_object().is_none_or(|id| scene.object(id).is_some());
        for r in &self.relations {
            for n in [&r.0, &r.1] {
                if !known(n) {
                    return Err(SimError::UnknownObject(n.to_string()));
                }
            }
        }
        for p in &self.predicates {
            let ids: Vec<&String> = match p {
                PosePredicate::Tilt { object, .. } => vec![object],
                PosePredicate::Over { object, container, .. } => vec![object, container],
            };
            if let Some(id) = ids.into_iter().find(|id| scene.object(id).is_none()) {
                return Err(SimError::UnknownObject(id.clone()));
            }
        }
        Ok(())
    }
}

fn predicate_holds(scene: &SimScene, p: &PosePredicate) -> bool {
    match p {
        PosePredicate::Tilt { object, min_degrees } => scene.object(object).is_some_and(|o| {
            let up = o.pose.rotation * Vec3::z();
            up.z.clamp(-1.0, 1.0).acos().to_degrees() >= *min_degrees
        }),
        PosePredicate::Over { object, point, container, radius } => {
            match (scene.object(object), scene.object(container)) {
                (Some(o), Some(c)) => {
                    let local = c.pose.inverse() * nalgebra::Point3::from(transform_point(&o.pose, point));
                    local.x.hypot(local.y) <= *radius && local.z >= 0.0
                }
                _ => false,
            }
        }
    }
}

/// Sparse reward: true iff every required relation and predicate holds.
pub fn check_goal(scene: &SimScene, goal: &GoalSpec, epsilon: f64) -> bool {
    let have = scene.relations(epsilon);
    goal.relations.iter().all(|r| have.contains(&Relation::new(r.0.clone(), r.1.clone())))
        && goal.predicates.iter().all(|p| predicate_holds(scene, p))
}
