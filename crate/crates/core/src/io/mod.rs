//! Versioned JSON file formats shared by bundles, plans, scenes, goals,
//! traces and evaluation results.
//!
//! Every file is an object with a `format` tag and integer `version` next to
//! the payload fields. Geometry is stored as plain arrays in meters;
//! rotations as `[w, x, y, z]` with `w >= 0`.

mod bundle;
mod config;

pub use bundle::{
    validate_bundle, validate_bundle_bytes, BundleError, BundleHand, BundleObject, CloudSnapshot, DemonstrationBundle,
    KeypointTrackRecord, PlaneSource, Violation, BUNDLE_FORMAT,
};
pub use config::{RunConfig, CONFIG_FORMAT};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("expected a `{expected}` file, found `{found}`")]
    WrongFormat { expected: String, found: String },
    #[error("unsupported {format} version {found} (this build reads version {FORMAT_VERSION})")]
    Version { format: String, found: u32 },
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    format: &'a str,
    version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a format header. Output is byte-stable for equal input.
pub fn to_json<T: Serialize>(format: &str, body: &T) -> Vec<u8> {
    let env = Envelope { format, version: FORMAT_VERSION, body };
    let mut out = serde_json::to_vec_pretty(&env).expect("in-memory serialization");
    out.push(b'\n');
    out
}

/// Parse a file produced by [`to_json`], reporting the offending field path
/// on schema errors.
pub fn from_json<T: DeserializeOwned>(format: &str, bytes: &[u8]) -> Result<T, FormatError> {
    let header: Header =
        serde_json::from_slice(bytes).map_err(|e| FormatError::Schema { path: "$".into(), message: e.to_string() })?;
    if header.format != format {
        return Err(FormatError::WrongFormat { expected: format.into(), found: header.format });
    }
    if header.version != FORMAT_VERSION {
        return Err(FormatError::Version { format: format.into(), found: header.version });
    }
    let mut value: serde_json::Value =
        serde_json::from_slice(bytes).map_err(|e| FormatError::Schema { path: "$".into(), message: e.to_string() })?;
    // drop the header so payload types can reject unknown fields
    if let Some(map) = value.as_object_mut() {
        map.remove("format");
        map.remove("version");
    }
    serde_path_to_error::deserialize(value)
        .map_err(|e| FormatError::Schema { path: e.path().to_string(), message: e.inner().to_string() })
}

/// `[x, y, z]` arrays.
pub mod vec3 {
    use crate::geom::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec3, D::Error> {
        let a = <[f64; 3]>::deserialize(d)?;
        Ok(Vec3::new(a[0], a[1], a[2]))
    }
}

/// Lists of `[x, y, z]` arrays.
pub mod vec3_list {
    use crate::geom::Vec3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec3], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 3]> = v.iter().map(|p| [p.x, p.y, p.z]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec3>, D::Error> {
        let raw = Vec::<[f64; 3]>::deserialize(d)?;
        Ok(raw.into_iter().map(|a| Vec3::new(a[0], a[1], a[2])).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    rotation: [f64; 4],
    translation: [f64; 3],
}

impl From<&crate::geom::Pose> for PoseRepr {
    fn from(p: &crate::geom::Pose) -> Self {
        let t = p.translation.vector;
        Self { rotation: crate::geom::quaternion_wxyz(&p.rotation), translation: [t.x, t.y, t.z] }
    }
}

impl PoseRepr {
    fn into_pose<E: serde::de::Error>(self) -> Result<crate::geom::Pose, E> {
        let q = self.rotation;
        let norm = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-6 {
            return Err(E::custom(format!("rotation quaternion norm {norm} is not 1")));
        }
        let quat = nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]);
        // leave near-unit input untouched so files round-trip bit for bit
        let r = if (norm - 1.0).abs() < 1e-12 {
            crate::geom::Rotation::new_unchecked(quat)
        } else {
            crate::geom::Rotation::new_normalize(quat)
        };
        if self.translation.iter().any(|v| !v.is_finite()) {
            return Err(E::custom("translation is not finite"));
        }
        let t = self.translation;
        Ok(crate::geom::pose(r, crate::geom::Vec3::new(t[0], t[1], t[2])))
    }
}

/// `{"rotation": [w, x, y, z], "translation": [x, y, z]}`.
pub mod pose {
    use super::PoseRepr;
    use crate::geom::Pose;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Pose, s: S) -> Result<S::Ok, S::Error> {
        PoseRepr::from(p).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Pose, D::Error> {
        PoseRepr::deserialize(d)?.into_pose()
    }
}

pub mod pose_list {
    use super::PoseRepr;
    use crate::geom::Pose;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Pose], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<PoseRepr> = v.iter().map(PoseRepr::from).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Pose>, D::Error> {
        Vec::<PoseRepr>::deserialize(d)?.into_iter().map(PoseRepr::into_pose).collect()
    }
}

pub mod opt_pose {
    use super::PoseRepr;
    use crate::geom::Pose;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<Pose>, s: S) -> Result<S::Ok, S::Error> {
        p.as_ref().map(PoseRepr::from).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Pose>, D::Error> {
        Option::<PoseRepr>::deserialize(d)?.map(PoseRepr::into_pose).transpose()
    }
}

/// Read and parse a file of the given format.
pub fn read_file<T: DeserializeOwned>(format: &str, path: &std::path::Path) -> Result<T, FormatError> {
    let bytes = std::fs::read(path)?;
    from_json(format, &bytes)
}

/// Write a file atomically enough for CLI use (write then rename).
pub fn write_file<T: Serialize>(format: &str, path: &std::path::Path, body: &T) -> Result<(), FormatError> {
    let bytes = to_json(format, body);
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, &bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
