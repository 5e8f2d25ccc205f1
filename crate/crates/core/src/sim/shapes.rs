//! Surface-sampled object models. Every shape sits on `z = 0` in its own
//! frame, centred on the z axis, and none has a rotational symmetry so
//! registration has a unique answer. Samples are seeded-random rather than
//! on a grid, so no lattice shift lines the surface up with itself.

use crate::geom::{PointCloud, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::sync::OnceLock;

/// Default sample spacing in meters.
pub const SPACING: f64 = 0.006;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    Mug,
    Coaster,
    Plate,
    JuiceBox,
    Cup,
    LBlock,
    Block,
}

impl Shape {
    pub const ALL: [Shape; 7] =
        [Shape::Mug, Shape::Coaster, Shape::Plate, Shape::JuiceBox, Shape::Cup, Shape::LBlock, Shape::Block];

    /// Shared copy of [`Shape::cloud`], sampled once per process.
    pub fn model(self) -> &'static PointCloud {
        static MODELS: [OnceLock<PointCloud>; 7] = [const { OnceLock::new() }; 7];
        MODELS[self as usize].get_or_init(|| self.cloud())
    }

    pub fn cloud(self) -> PointCloud {
        let s = SPACING;
        let r = &mut ChaCha8Rng::seed_from_u64(self as u64 + 1);
        let pts = match self {
            Shape::Mug => {
                let mut p = cylinder(r, 0.04, 0.09, s, true, false);
                p.extend(handle(r, Vec3::new(0.04, 0.0, 0.045), 0.025, 0.006, s));
                p
            }
            Shape::Coaster => {
                let mut p = cuboid(r, Vec3::zeros(), Vec3::new(0.12, 0.12, 0.008), s);
                p.extend(cuboid(r, Vec3::new(0.0, -0.055, 0.008), Vec3::new(0.12, 0.01, 0.022), s));
                p.extend(cuboid(r, Vec3::new(-0.055, 0.005, 0.008), Vec3::new(0.01, 0.11, 0.022), s));
                p
            }
            Shape::Plate => {
                let mut p = cuboid(r, Vec3::zeros(), Vec3::new(0.22, 0.16, 0.01), s);
                p.extend(cuboid(r, Vec3::new(0.0, 0.075, 0.01), Vec3::new(0.22, 0.01, 0.03), s));
                p.extend(cuboid(r, Vec3::new(-0.105, -0.005, 0.01), Vec3::new(0.01, 0.15, 0.03), s));
                p
            }
            Shape::JuiceBox => {
                let mut p = cuboid(r, Vec3::zeros(), Vec3::new(0.06, 0.04, 0.12), s);
                p.extend(cylinder(r, 0.008, 0.02, s * 0.6, false, true).into_iter().map(|q| q + JUICE_SPOUT_BASE));
                p
            }
            Shape::Cup => {
                let mut p = cylinder(r, 0.035, 0.08, s, true, false);
                p.extend(handle(r, Vec3::new(0.035, 0.0, 0.04), 0.02, 0.005, s));
                p
            }
            Shape::LBlock => {
                let mut p = cuboid(r, Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.09, 0.04, 0.04), s);
                p.extend(cuboid(r, Vec3::new(-0.025, 0.0, 0.04), Vec3::new(0.04, 0.04, 0.05), s));
                p
            }
            Shape::Block => {
                let mut p = cuboid(r, Vec3::zeros(), Vec3::new(0.06, 0.04, 0.05), s);
                p.extend(cuboid(r, Vec3::new(0.015, 0.035, 0.0), Vec3::new(0.03, 0.03, 0.035), s));
                p
            }
        };
        PointCloud::new(dedup(pts, s * 0.5))
    }
}

/// Base centre of the juice box spout, object frame.
pub const JUICE_SPOUT_BASE: Vec3 = Vec3::new(0.018, 0.008, 0.12);
/// Tip of the juice box spout, object frame.
pub const JUICE_SPOUT_TIP: Vec3 = Vec3::new(0.018, 0.008, 0.14);

fn count(area: f64, spacing: f64) -> usize {
    ((area / (spacing * spacing)).round() as usize).max(1)
}

/// Closed box surface with its base centred at `base`, sampled uniformly.
fn cuboid(rng: &mut ChaCha8Rng, base: Vec3, size: Vec3, spacing: f64) -> Vec<Vec3> {
    let (hx, hy) = (size.x / 2.0, size.y / 2.0);
    let faces = [
        (size.x * size.y, 0usize),
        (size.x * size.y, 1),
        (size.x * size.z, 2),
        (size.x * size.z, 3),
        (size.y * size.z, 4),
        (size.y * size.z, 5),
    ];
    let mut out = Vec::new();
    for (area, face) in faces {
        for _ in 0..count(area, spacing) {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let p = match face {
                0 => Vec3::new(-hx + u * size.x, -hy + v * size.y, 0.0),
                1 => Vec3::new(-hx + u * size.x, -hy + v * size.y, size.z),
                2 => Vec3::new(-hx + u * size.x, -hy, v * size.z),
                3 => Vec3::new(-hx + u * size.x, hy, v * size.z),
                4 => Vec3::new(-hx, -hy + u * size.y, v * size.z),
                _ => Vec3::new(hx, -hy + u * size.y, v * size.z),
            };
            out.push(p + base);
        }
    }
    out
}

/// Cylinder wall with optional bottom and top disks.
fn cylinder(rng: &mut ChaCha8Rng, radius: f64, height: f64, spacing: f64, bottom: bool, top: bool) -> Vec<Vec3> {
    let mut out = Vec::new();
    for _ in 0..count(TAU * radius * height, spacing) {
        let a = TAU * rng.random::<f64>();
        out.push(Vec3::new(radius * a.cos(), radius * a.sin(), height * rng.random::<f64>()));
    }
    let disk_area = std::f64::consts::PI * radius * radius;
    for (on, z) in [(bottom, 0.0), (top, height)] {
        if !on {
            continue;
        }
        for _ in 0..count(disk_area, spacing) {
            let r = radius * rng.random::<f64>().sqrt();
            let a = TAU * rng.random::<f64>();
            out.push(Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    }
    out
}

/// Half-ring handle in the xz plane bulging toward +x from `center`.
fn handle(rng: &mut ChaCha8Rng, center: Vec3, major: f64, minor: f64, spacing: f64) -> Vec<Vec3> {
    let area = std::f64::consts::PI * major * TAU * minor;
    (0..count(area, spacing))
        .map(|_| {
            let u = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * rng.random::<f64>();
            let v = TAU * rng.random::<f64>();
            let ring = Vec3::new(u.cos(), 0.0, u.sin());
            center + ring * (major + minor * v.cos()) + Vec3::new(0.0, minor * v.sin(), 0.0)
        })
        .collect()
}

/// Drop points closer than `tol` to an earlier kept point.
fn dedup(points: Vec<Vec3>, tol: f64) -> Vec<Vec3> {
    let mut kept: Vec<Vec3> = Vec::with_capacity(points.len());
    let mut grid: std::collections::HashMap<(i64, i64, i64), Vec<usize>> = Default::default();
    let key = |p: &Vec3| ((p.x / tol).floor() as i64, (p.y / tol).floor() as i64, (p.z / tol).floor() as i64);
    for p in points {
        let (kx, ky, kz) = key(&p);
        let mut clash = false;
        'outer: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        if ids.iter().any(|&i| (kept[i] - p).norm() < tol) {
                            clash = true;
                            break 'outer;
                        }
                    }
                }
            }
        }
        if !clash {
            grid.entry((kx, ky, kz)).or_default().push(kept.len());
            kept.push(p);
        }
    }
    kept
}
