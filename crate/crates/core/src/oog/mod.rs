//! Object graphs (OOGs): per-keyframe object, grasp and point nodes joined
//! by binary contact edges, and the ordered plans built from them.

mod build;
mod contact;
mod dot;
mod plan_io;

pub(crate) use build::assemble;
pub use build::{build_oog, build_plan, estimate_plane, HandInput, KeyframeInput, ObjectInput, PlanBuildConfig};
pub use contact::{contact, min_distance};
pub use dot::to_dot;
pub use plan_io::{deserialize_plan, serialize_plan, PLAN_FORMAT};

use crate::geom::{GeomError, PointCloud, Pose, Vec3};
use crate::io::{FormatError, Violation};
use crate::tracks::{CaptureMode, TrackError};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Reserved node id of the hand / gripper.
pub const HAND_ID: &str = "hand";

/// Contact threshold used when a bundle or config does not override it.
pub const DEFAULT_EPSILON_CONTACT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum OogError {
    #[error("bundle failed validation with {} violation(s): {}", .0.len(), summarize(.0))]
    Invalid(Vec<Violation>),
    #[error("point node references missing object `{0}`")]
    MissingObject(String),
    #[error("every keyframe has the same contact relations; nothing to imitate")]
    NoRelationChange,
    #[error("plan invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

fn summarize(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectType {
    Manipulate,
    Reference,
    Other,
}

impl ObjectType {
    pub fn as_str(self) -> &'static str {
        match self {
            ObjectType::Manipulate => "manipulate",
            ObjectType::Reference => "reference",
            ObjectType::Other => "other",
        }
    }
}

/// Graph node identity. Objects sort before the hand, so canonical pairs
/// read `(object, hand)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeRef {
    Object(String),
    Hand,
}

impl NodeRef {
    pub fn object(id: impl Into<String>) -> Self {
        NodeRef::Object(id.into())
    }

    pub fn as_object(&self) -> Option<&str> {
        match self {
            NodeRef::Object(id) => Some(id),
            NodeRef::Hand => None,
        }
    }

    pub fn is_hand(&self) -> bool {
        matches!(self, NodeRef::Hand)
    }
}

impl fmt::Display for NodeRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRef::Object(id) => f.write_str(id),
            NodeRef::Hand => f.write_str(HAND_ID),
        }
    }
}

impl Serialize for NodeRef {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NodeRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == HAND_ID { NodeRef::Hand } else { NodeRef::Object(s) })
    }
}

/// Unordered node pair stored canonically (smaller first).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation(pub NodeRef, pub NodeRef);

impl Relation {
    pub fn new(a: NodeRef, b: NodeRef) -> Self {
        if a <= b {
            Relation(a, b)
        } else {
            Relation(b, a)
        }
    }

    pub fn objects(a: &str, b: &str) -> Self {
        Self::new(NodeRef::object(a), NodeRef::object(b))
    }

    pub fn with_hand(a: &str) -> Self {
        Self::new(NodeRef::object(a), NodeRef::Hand)
    }

    pub fn involves_hand(&self) -> bool {
        self.0.is_hand() || self.1.is_hand()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.as_object() == Some(id) || self.1.as_object() == Some(id)
    }

    /// The endpoint that is not `id`.
    pub fn other(&self, id: &str) -> Option<&NodeRef> {
        if self.0.as_object() == Some(id) {
            Some(&self.1)
        } else if self.1.as_object() == Some(id) {
            Some(&self.0)
        } else {
            None
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.0, self.1)
    }
}

/// Contacting pairs only, sorted.
pub type RelationSet = BTreeSet<Relation>;

pub fn format_relations(set: &RelationSet) -> String {
    let inner: Vec<String> = set.iter().map(|r| r.to_string()).collect();
    format!("{{{}}}", inner.join(", "))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: String,
    pub name: String,
    pub object_type: ObjectType,
    /// Plane-aligned cloud at this keyframe.
    pub cloud: PointCloud,
    /// Metrically scaled model vertices in the object frame (RGB captures).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_vertices: Option<PointCloud>,
    /// Object pose at this keyframe (RGB captures).
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::io::opt_pose")]
    pub pose: Option<Pose>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraspNode {
    #[serde(with = "crate::io::vec3_list")]
    pub grasp_points: Vec<Vec3>,
    pub grip_closed: bool,
}

impl GraspNode {
    pub fn is_empty(&self) -> bool {
        self.grasp_points.is_empty()
    }
}

/// Motion of a point node from this keyframe to the next, inclusive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureTrajectory {
    Points(#[serde(with = "crate::io::vec3_list")] Vec<Vec3>),
    Poses(#[serde(with = "crate::io::pose_list")] Vec<Pose>),
}

impl FeatureTrajectory {
    pub fn len(&self) -> usize {
        match self {
            FeatureTrajectory::Points(p) => p.len(),
            FeatureTrajectory::Poses(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean per-step displacement in meters.
    pub fn mean_speed(&self) -> f64 {
        let steps: Vec<f64> = match self {
            FeatureTrajectory::Points(p) => p.windows(2).map(|w| (w[1] - w[0]).norm()).collect(),
            FeatureTrajectory::Poses(p) => {
                p.windows(2).map(|w| (w[1].translation.vector - w[0].translation.vector).norm()).collect()
            }
        };
        if steps.is_empty() {
            0.0
        } else {
            steps.iter().sum::<f64>() / steps.len() as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointNode {
    pub parent: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoint_id: Option<u32>,
    pub trajectory: FeatureTrajectory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEdge {
    pub a: NodeRef,
    pub b: NodeRef,
    pub contact: bool,
}

/// One keyframe of a demonstration or one observed state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Oog {
    pub keyframe: usize,
    pub objects: Vec<ObjectNode>,
    pub grasp: GraspNode,
    pub points: Vec<PointNode>,
    pub edges: Vec<ContactEdge>,
}

impl Oog {
    pub fn object(&self, id: &str) -> Option<&ObjectNode> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn relation_set(&self) -> RelationSet {
        self.edges.iter().filter(|e| e.contact).map(|e| Relation::new(e.a.clone(), e.b.clone())).collect()
    }

    pub fn points_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a PointNode> + 'a {
        self.points.iter().filter(move |p| p.parent == id)
    }

    /// Mean point-node speed of an object over this keyframe's segment.
    pub fn object_speed(&self, id: &str) -> f64 {
        let speeds: Vec<f64> = self.points_of(id).map(|p| p.trajectory.mean_speed()).collect();
        if speeds.is_empty() {
            0.0
        } else {
            speeds.iter().sum::<f64>() / speeds.len() as f64
        }
    }

    /// Structural invariants: known point parents, unique object ids, and
    /// an edge for every unordered pair of object and hand nodes.
    pub fn check(&self) -> Result<(), OogError> {
        let ids: BTreeSet<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        if ids.len() != self.objects.len() {
            return Err(OogError::Invariant(format!("duplicate object ids at keyframe {}", self.keyframe)));
        }
        if ids.contains(HAND_ID) {
            return Err(OogError::Invariant(format!("object id `{HAND_ID}` is reserved")));
        }
        for p in &self.points {
            if !ids.contains(p.parent.as_str()) {
                return Err(OogError::MissingObject(p.parent.clone()));
            }
        }
        let have: BTreeSet<Relation> = self.edges.iter().map(|e| Relation::new(e.a.clone(), e.b.clone())).collect();
        if have.len() != self.edges.len() {
            return Err(OogError::Invariant(format!("duplicate edges at keyframe {}", self.keyframe)));
        }
        let want = full_pairs(self.objects.iter().map(|o| o.id.as_str()));
        if have != want {
            return Err(OogError::Invariant(format!(
                "edge set at keyframe {} does not cover all node pairs",
                self.keyframe
            )));
        }
        Ok(())
    }
}

/// Every unordered pair over the given objects plus the hand.
pub fn full_pairs<'a>(ids: impl Iterator<Item = &'a str>) -> BTreeSet<Relation> {
    let mut nodes: Vec<NodeRef> = ids.map(NodeRef::object).collect();
    nodes.push(NodeRef::Hand);
    let mut out = BTreeSet::new();
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            out.insert(Relation::new(nodes[i].clone(), nodes[j].clone()));
        }
    }
    out
}

/// Ordered keyframe graphs `G_0 .. G_L` abstracting one demonstration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub mode: CaptureMode,
    pub epsilon_contact: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub oogs: Vec<Oog>,
}

impl Plan {
    /// Index of the final graph, `L`.
    pub fn last_index(&self) -> usize {
        self.oogs.len().saturating_sub(1)
    }

    pub fn keyframes(&self) -> Vec<usize> {
        self.oogs.iter().map(|g| g.keyframe).collect()
    }

    pub fn relation_sets(&self) -> Vec<RelationSet> {
        self.oogs.iter().map(Oog::relation_set).collect()
    }

    pub fn validate(&self) -> Result<(), OogError> {
        if self.oogs.len() < 2 {
            return Err(OogError::Invariant(format!("plan needs at least 2 graphs, has {}", self.oogs.len())));
        }
        if !(self.epsilon_contact.is_finite() && self.epsilon_contact > 0.0) {
            return Err(OogError::Invariant("epsilon_contact must be > 0".into()));
        }
        for w in self.oogs.windows(2) {
            if w[0].keyframe >= w[1].keyframe {
                return Err(OogError::Invariant(format!(
                    "keyframes not strictly increasing: {} then {}",
                    w[0].keyframe, w[1].keyframe
                )));
            }
            if w[0].relation_set() == w[1].relation_set() {
                return Err(OogError::Invariant(format!(
                    "keyframes {} and {} share the same relation set",
                    w[0].keyframe, w[1].keyframe
                )));
            }
        }
        for (l, g) in self.oogs.iter().enumerate() {
            g.check()?;
            let expected = match self.oogs.get(l + 1) {
                Some(next) => next.keyframe - g.keyframe + 1,
                None => 1,
            };
            for p in &g.points {
                if p.trajectory.len() != expected {
                    return Err(OogError::Invariant(format!(
                        "point node of `{}` at keyframe {} has {} samples, expected {expected}",
                        p.parent,
                        g.keyframe,
                        p.trajectory.len()
                    )));
                }
                let ok = matches!(
                    (&p.trajectory, self.mode),
                    (FeatureTrajectory::Points(_), CaptureMode::Rgbd) | (FeatureTrajectory::Poses(_), CaptureMode::Rgb)
                );
                if !ok {
                    return Err(OogError::Invariant(format!(
                        "point node of `{}` has the wrong trajectory kind for {:?}",
                        p.parent, self.mode
                    )));
                }
            }
            if self.mode == CaptureMode::Rgb {
                for o in &g.objects {
                    if g.points_of(&o.id).count() > 1 {
                        return Err(OogError::Invariant(format!(
                            "RGB graph carries more than one pose track for `{}`",
                            o.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
