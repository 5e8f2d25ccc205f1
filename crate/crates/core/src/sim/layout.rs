//! Scene templates and randomized test layouts.

use super::goal::GoalSpec;
use super::scene::{SimConfig, SimScene};
use super::SimError;
use crate::geom::{pose, Pose, Rotation, Vec3};
use crate::oog::{min_distance, DEFAULT_EPSILON_CONTACT};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const TEMPLATE_FORMAT: &str = "oog-scene-template";

/// Placements tried before a layout is declared infeasible.
pub const PLACEMENT_ATTEMPTS: usize = 100;

/// Random offsets applied to one object's template pose: a yaw about the
/// object's own vertical axis, then a horizontal shift. Ranges are closed
/// intervals; `[0, 0]` keeps the template value. Objects listed in
/// `carry` (say, a mug standing on a coaster) move rigidly along.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub object: String,
    pub dx: [f64; 2],
    pub dy: [f64; 2],
    pub dyaw: [f64; 2],
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub carry: Vec<String>,
}

impl Region {
    pub fn fixed(object: &str) -> Self {
        Self { object: object.into(), dx: [0.0; 2], dy: [0.0; 2], dyaw: [0.0; 2], carry: Vec::new() }
    }

    pub fn square(object: &str, half_width: f64, half_yaw: f64) -> Self {
        Self {
            object: object.into(),
            dx: [-half_width, half_width],
            dy: [-half_width, half_width],
            dyaw: [-half_yaw, half_yaw],
            carry: Vec::new(),
        }
    }

    fn sample(range: [f64; 2], rng: &mut ChaCha8Rng) -> f64 {
        if range[1] > range[0] {
            rng.random_range(range[0]..=range[1])
        } else {
            range[0]
        }
    }
}

/// A task: its objects in a nominal layout, where each may be placed, and
/// what counts as success.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskTemplate {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub scene: SimScene,
    pub goal: GoalSpec,
    #[serde(default)]
    pub regions: Vec<Region>,
    /// Minimum gap between objects that do not touch in the template.
    pub clearance: f64,
    #[serde(default)]
    pub sim: SimConfig,
}

impl TaskTemplate {
    pub fn validate(&self) -> Result<(), SimError> {
        self.scene.validate()?;
        self.goal.validate(&self.scene)?;
        self.sim.validate()?;
        if !(self.clearance.is_finite() && self.clearance >= 0.0) {
            return Err(SimError::Invalid("clearance must be >= 0".into()));
        }
        for r in &self.regions {
            if let Some(id) = std::iter::once(&r.object).chain(&r.carry).find(|id| self.scene.object(id).is_none()) {
                return Err(SimError::UnknownObject(id.clone()));
            }
            let ordered = |v: [f64; 2]| v[0].is_finite() && v[1].is_finite() && v[0] <= v[1];
            if !(ordered(r.dx) && ordered(r.dy) && ordered(r.dyaw)) {
                return Err(SimError::Invalid(format!("region of `{}` has an unordered range", r.object)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Vec<u8> {
        crate::io::to_json(TEMPLATE_FORMAT, self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, SimError> {
        let t: TaskTemplate = crate::io::from_json(TEMPLATE_FORMAT, bytes)?;
        t.validate()?;
        Ok(t)
    }

    /// Pairs that touch in the template and may keep touching.
    fn touching_pairs(&self) -> Vec<(usize, usize)> {
        let clouds: Vec<_> = self.scene.objects.iter().map(|o| o.cloud()).collect();
        pairs(clouds.len())
            .filter(|&(i, j)| min_distance(&clouds[i], &clouds[j]).is_some_and(|d| d < DEFAULT_EPSILON_CONTACT))
            .collect()
    }
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

/// `p` turned by `yaw` about its own vertical axis and shifted by `(dx, dy)`.
pub fn offset_pose(p: &Pose, dx: f64, dy: f64, yaw: f64) -> Pose {
    let r = Rotation::from_axis_angle(&Vec3::z_axis(), yaw) * p.rotation;
    pose(r, p.translation.vector + Vec3::new(dx, dy, 0.0))
}

/// Sample a layout from the template's regions, rejecting placements where
/// objects that are apart in the template come closer than the clearance.
pub fn randomize_layout(template: &TaskTemplate, seed: u64) -> Result<SimScene, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let touching = template.touching_pairs();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let mut scene = template.scene.clone();
        for r in &template.regions {
            let (dx, dy, yaw) =
                (Region::sample(r.dx, &mut rng), Region::sample(r.dy, &mut rng), Region::sample(r.dyaw, &mut rng));
            if (dx, dy, yaw) == (0.0, 0.0, 0.0) {
                continue;
            }
            let Some(anchor) = scene.object(&r.object).map(|o| o.pose) else { continue };
            let moved = offset_pose(&anchor, dx, dy, yaw);
            let delta = moved * anchor.inverse();
            for o in scene.objects.iter_mut().filter(|o| o.id == r.object || r.carry.contains(&o.id)) {
                o.pose = delta * o.pose;
            }
        }
        let clouds: Vec<_> = scene.objects.iter().map(|o| o.cloud()).collect();
        let clear = pairs(clouds.len())
            .filter(|p| !touching.contains(p))
            .all(|(i, j)| min_distance(&clouds[i], &clouds[j]).is_none_or(|d| d >= template.clearance));
        if clear {
            return Ok(scene);
        }
    }
    Err(SimError::Placement { attempts: PLACEMENT_ATTEMPTS })
}
