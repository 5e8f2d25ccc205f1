//! Demonstration bundles: everything upstream perception produced for one
//! video, in camera-frame meters.

use super::FormatError;
use crate::geom::{CameraIntrinsics, PointCloud, Pose, Vec3};
use crate::oog::{ObjectType, HAND_ID};
use crate::tracks::{CaptureMode, KeypointTrack};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

pub const BUNDLE_FORMAT: &str = "oog-bundle";

/// Where the table plane comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneSource {
    /// `normal · p = d` in the camera frame.
    Explicit {
        #[serde(with = "super::vec3")]
        normal: Vec3,
        d: f64,
    },
    /// Scene points dominated by the table; fitted with RANSAC.
    TablePoints {
        #[serde(with = "super::vec3_list")]
        points: Vec<Vec3>,
    },
    /// A depth frame and optional table mask, back-projected then fitted.
    Depth {
        intrinsics: CameraIntrinsics,
        depth: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mask: Option<Vec<bool>>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointTrackRecord {
    pub keypoint_id: u32,
    #[serde(with = "super::vec3_list")]
    pub positions: Vec<Vec3>,
    /// Omitted means visible in every frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub visible: Option<Vec<bool>>,
}

impl KeypointTrackRecord {
    pub fn to_track(&self) -> KeypointTrack {
        KeypointTrack {
            keypoint_id: self.keypoint_id,
            positions: self.positions.clone(),
            visible: self.visible.clone().unwrap_or_else(|| vec![true; self.positions.len()]),
        }
    }
}

/// An object cloud observed at a specific frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudSnapshot {
    pub frame: usize,
    pub cloud: PointCloud,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleObject {
    pub id: String,
    pub name: String,
    pub object_type: ObjectType,
    /// Segmented cloud at frame 0 (depth captures).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud: Option<PointCloud>,
    /// Extra segmented clouds at later frames; they override propagation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snapshots: Vec<CloudSnapshot>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tracks: Vec<KeypointTrackRecord>,
    /// Reconstructed mesh vertices at arbitrary scale (RGB captures).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_vertices: Option<PointCloud>,
    /// Metric reference cloud used to scale `model_vertices`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_cloud: Option<PointCloud>,
    /// Per-frame pose of the scaled model (RGB captures).
    #[serde(default, skip_serializing_if = "Vec::is_empty", with = "super::pose_list")]
    pub poses: Vec<Pose>,
}

/// Hand state in one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleHand {
    #[serde(with = "super::vec3_list")]
    pub fingertips: Vec<Vec3>,
    pub closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonstrationBundle {
    pub mode: CaptureMode,
    pub frame_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_contact: Option<f64>,
    pub plane: PlaneSource,
    pub objects: Vec<BundleObject>,
    /// One entry per frame, `null` where the hand was not detected. Empty
    /// when the capture has no hand data at all.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hand: Vec<Option<BundleHand>>,
}

impl DemonstrationBundle {
    pub fn to_json(&self) -> Vec<u8> {
        super::to_json(BUNDLE_FORMAT, self)
    }

    pub fn object(&self, id: &str) -> Option<&BundleObject> {
        self.objects.iter().find(|o| o.id == id)
    }
}

/// One failed bundle check, located by field path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Error)]
pub enum BundleError {
    #[error(transparent)]
    Parse(#[from] FormatError),
    #[error("{} violation(s), first: {}", .0.len(), .0[0])]
    Invalid(Vec<Violation>),
}

struct Checker(Vec<Violation>);

impl Checker {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { path: path.into(), message: message.into() });
    }

    fn cloud(&mut self, path: &str, cloud: &PointCloud) {
        if cloud.is_empty() {
            self.fail(path, "cloud is empty");
        }
        if let Some(i) = cloud.points.iter().position(|p| !finite(p)) {
            self.fail(format!("{path}.points[{i}]"), "non-finite coordinate");
        }
        if let Some(c) = &cloud.colors {
            if c.len() != cloud.len() {
                self.fail(format!("{path}.colors"), format!("{} colors for {} points", c.len(), cloud.len()));
            }
        }
    }
}

fn finite(p: &Vec3) -> bool {
    p.iter().all(|v| v.is_finite())
}

/// Check every bundle invariant, collecting all violations.
pub fn validate_bundle(b: &DemonstrationBundle) -> Result<(), Vec<Violation>> {
    let mut c = Checker(Vec::new());
    let n = b.frame_count;
    if n < 2 {
        c.fail("frame_count", format!("need at least 2 frames, got {n}"));
    }
    if let Some(eps) = b.epsilon_contact {
        if !(eps.is_finite() && eps > 0.0) {
            c.fail("epsilon_contact", "must be finite and > 0");
        }
    }
    match &b.plane {
        PlaneSource::Explicit { normal, d } => {
            if !finite(normal) || normal.norm() < 1e-9 || !d.is_finite() {
                c.fail("plane.explicit", "normal must be finite and nonzero, d finite");
            }
        }
        PlaneSource::TablePoints { points } => {
            if points.len() < 3 {
                c.fail("plane.table_points.points", "need at least 3 points");
            }
            if points.iter().any(|p| !finite(p)) {
                c.fail("plane.table_points.points", "non-finite coordinate");
            }
        }
        PlaneSource::Depth { intrinsics, depth, mask } => {
            if intrinsics.validate().is_err() {
                c.fail("plane.depth.intrinsics", "invalid intrinsics");
            }
            let px = intrinsics.width * intrinsics.height;
            if depth.len() != px {
                c.fail("plane.depth.depth", format!("{} samples for {px} pixels", depth.len()));
            }
            if mask.as_ref().is_some_and(|m| m.len() != px) {
                c.fail("plane.depth.mask", "mask size does not match intrinsics");
            }
        }
    }

    if b.objects.is_empty() {
        c.fail("objects", "no objects");
    }
    if !b.objects.iter().any(|o| o.object_type == ObjectType::Manipulate) {
        c.fail("objects", "no manipulate-typed object");
    }
    let mut seen = BTreeSet::new();
    let mut any_track = false;
    for (i, o) in b.objects.iter().enumerate() {
        let at = format!("objects[{i}]");
        if o.id.is_empty() {
            c.fail(format!("{at}.id"), "empty id");
        } else if o.id == HAND_ID {
            c.fail(format!("{at}.id"), format!("`{HAND_ID}` is reserved"));
        } else if !seen.insert(o.id.as_str()) {
            c.fail(format!("{at}.id"), format!("duplicate id `{}`", o.id));
        }
        match b.mode {
            CaptureMode::Rgbd => {
                match &o.cloud {
                    Some(cl) => c.cloud(&format!("{at}.cloud"), cl),
                    None => c.fail(format!("{at}.cloud"), "depth captures need a frame-0 cloud"),
                }
                for (j, s) in o.snapshots.iter().enumerate() {
                    if s.frame >= n {
                        c.fail(format!("{at}.snapshots[{j}].frame"), format!("frame {} out of range", s.frame));
                    }
                    c.cloud(&format!("{at}.snapshots[{j}].cloud"), &s.cloud);
                }
                for (j, t) in o.tracks.iter().enumerate() {
                    any_track = true;
                    let tp = format!("{at}.tracks[{j}]");
                    if t.positions.len() != n {
                        c.fail(&tp, format!("{} positions, expected {n}", t.positions.len()));
                    }
                    if t.visible.as_ref().is_some_and(|v| v.len() != n) {
                        c.fail(format!("{tp}.visible"), format!("expected {n} flags"));
                    }
                    if t.positions.iter().any(|p| !finite(p)) {
                        c.fail(format!("{tp}.positions"), "non-finite coordinate");
                    }
                }
            }
            CaptureMode::Rgb => {
                if o.poses.len() != n {
                    c.fail(format!("{at}.poses"), format!("{} poses, expected {n}", o.poses.len()));
                }
                match &o.model_vertices {
                    Some(v) => c.cloud(&format!("{at}.model_vertices"), v),
                    None => c.fail(format!("{at}.model_vertices"), "RGB captures need model vertices"),
                }
                if let Some(d) = &o.depth_cloud {
                    c.cloud(&format!("{at}.depth_cloud"), d);
                }
            }
        }
    }
    if b.mode == CaptureMode::Rgbd && !any_track {
        c.fail("objects", "no keypoint tracks");
    }
    if !b.hand.is_empty() && b.hand.len() != n {
        c.fail("hand", format!("{} entries, expected {n}", b.hand.len()));
    }
    for (i, h) in b.hand.iter().enumerate() {
        if let Some(h) = h {
            if h.fingertips.iter().any(|p| !finite(p)) {
                c.fail(format!("hand[{i}].fingertips"), "non-finite coordinate");
            }
        }
    }
    if c.0.is_empty() {
        Ok(())
    } else {
        Err(c.0)
    }
}

/// Parse and validate, keeping parse failures apart from semantic ones.
pub fn validate_bundle_bytes(bytes: &[u8]) -> Result<DemonstrationBundle, BundleError> {
    let bundle: DemonstrationBundle = super::from_json(BUNDLE_FORMAT, bytes)?;
    validate_bundle(&bundle).map_err(BundleError::Invalid)?;
    Ok(bundle)
}
