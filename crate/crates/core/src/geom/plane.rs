use super::{pose, rodrigues_align, GeomError, PointCloud, Pose, Rotation, Vec3};
use crate::par::{best_by_chunks, Parallelism};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Plane `n . x = d` with unit normal `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Plane {
    /// Normalizes `(a, b, c)` and scales `d` to match.
    pub fn new(normal: Vec3, d: f64) -> Result<Self, GeomError> {
        let n = normal.norm();
        if n <= super::EPS_DIR || !n.is_finite() || !d.is_finite() {
            return Err(GeomError::DegenerateDirection(n));
        }
        let u = normal / n;
        Ok(Self { a: u.x, b: u.y, c: u.z, d: d / n })
    }

    pub fn normal(&self) -> Vec3 {
        Vec3::new(self.a, self.b, self.c)
    }

    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal().dot(p) - self.d
    }

    /// Same plane with the normal flipped if needed so the origin (camera
    /// center) lies on the positive side.
    pub fn oriented_toward_origin(&self) -> Self {
        if self.d > 0.0 {
            Self { a: -self.a, b: -self.b, c: -self.c, d: -self.d }
        } else {
            *self
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlaneFitConfig {
    pub iterations: usize,
    /// meters
    pub inlier_threshold: f64,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for PlaneFitConfig {
    fn default() -> Self {
        Self { iterations: 1000, inlier_threshold: 0.005, seed: 0, parallelism: Parallelism::default() }
    }
}

/// RANSAC plane fit over seeded 3-point hypotheses, refined by least squares
/// over the winning inlier set. The result is oriented toward the origin.
pub fn fit_plane_ransac(cloud: &PointCloud, cfg: &PlaneFitConfig) -> Result<Plane, GeomError> {
    let pts = &cloud.points;
    if pts.len() < 3 {
        return Err(GeomError::InsufficientPoints { needed: 3, got: pts.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples: Vec<[usize; 3]> = (0..cfg.iterations.max(1))
        .map(|_| {
            let i = rng.random_range(0..pts.len());
            let mut j = rng.random_range(0..pts.len() - 1);
            if j >= i {
                j += 1;
            }
            let mut k = rng.random_range(0..pts.len() - 2);
            for m in [i.min(j), i.max(j)] {
                if k >= m {
                    k += 1;
                }
            }
            [i, j, k]
        })
        .collect();

    let hypothesis = |s: &[usize; 3]| -> Option<Plane> {
        let (p0, p1, p2) = (pts[s[0]], pts[s[1]], pts[s[2]]);
        let n = (p1 - p0).cross(&(p2 - p0));
        let scale = (p1 - p0).norm() * (p2 - p0).norm();
        if n.norm() <= 1e-9 * scale.max(1e-300) {
            return None;
        }
        Plane::new(n, n.dot(&p0)).ok()
    };
    let best = best_by_chunks(
        cfg.parallelism,
        samples.len(),
        256,
        |h| {
            let plane = hypothesis(&samples[h])?;
            Some(pts.iter().filter(|p| plane.signed_distance(p).abs() <= cfg.inlier_threshold).count())
        },
        |_, _| false,
    );
    let (h, _) = best.ok_or(GeomError::DegenerateGeometry("all plane hypotheses are collinear"))?;
    let plane = hypothesis(&samples[h]).expect("scored hypothesis is valid");
    let inliers: Vec<Vec3> =
        pts.iter().copied().filter(|p| plane.signed_distance(p).abs() <= cfg.inlier_threshold).collect();
    let refined = least_squares_plane(&inliers).unwrap_or(plane);
    // keep the refined normal on the hypothesis side before orienting
    let refined = if refined.normal().dot(&plane.normal()) < 0.0 {
        Plane { a: -refined.a, b: -refined.b, c: -refined.c, d: -refined.d }
    } else {
        refined
    };
    Ok(refined.oriented_toward_origin())
}

fn least_squares_plane(points: &[Vec3]) -> Option<Plane> {
    if points.len() < 3 {
        return None;
    }
    let c = super::centroid(points)?;
    let mut cov = Matrix3::zeros();
    for p in points {
        let a = p - c;
        cov += a * a.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (imin, _) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1))?;
    let n: Vec3 = eig.eigenvectors.column(imin).into_owned();
    Plane::new(n, n.dot(&c)).ok()
}

/// Rigid transform sending the (origin-oriented) plane normal to `+z` and
/// the plane itself to `z = 0`, leaving the camera center at positive z.
pub fn plane_alignment_transform(plane: &Plane) -> Pose {
    let p = plane.oriented_toward_origin();
    let rotation = rodrigues_align(&p.normal(), &Vec3::z()).unwrap_or_else(|_| Rotation::identity());
    pose(rotation, Vec3::new(0.0, 0.0, -p.d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::transform_point;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn exact_horizontal_plane() {
        let pts: Vec<Vec3> = (0..100).map(|i| Vec3::new((i % 10) as f64 * 0.1, (i / 10) as f64 * 0.1, 0.5)).collect();
        let p = fit_plane_ransac(&PointCloud::new(pts), &PlaneFitConfig::default()).unwrap();
        // oriented toward the origin: (0,0,-1) . x = -0.5
        assert!((p.normal() - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
        assert!((p.d + 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_points_rejected() {
        let c = PointCloud::new(vec![Vec3::zeros(), Vec3::x()]);
        assert!(matches!(fit_plane_ransac(&c, &PlaneFitConfig::default()), Err(GeomError::InsufficientPoints { .. })));
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let c = PointCloud::new((0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect());
        assert!(matches!(fit_plane_ransac(&c, &PlaneFitConfig::default()), Err(GeomError::DegenerateGeometry(_))));
    }

    #[test]
    fn alignment_of_z_plane_is_identity_rotation() {
        let t = plane_alignment_transform(&Plane::new(Vec3::z(), -0.3).unwrap());
        assert!(t.rotation.angle() < 1e-12);
        assert!((transform_point(&t, &Vec3::new(0.2, 0.1, -0.3)).z).abs() < 1e-12);
    }

    #[test]
    fn alignment_of_x_plane_is_quarter_turn() {
        let t = plane_alignment_transform(&Plane::new(Vec3::x(), -1.0).unwrap());
        assert!((t.rotation.angle() - FRAC_PI_2).abs() < 1e-12);
        assert!((t.rotation * Vec3::x() - Vec3::z()).norm() < 1e-12);
        // camera center ends above the table
        assert!(transform_point(&t, &Vec3::zeros()).z > 0.0);
    }

    #[test]
    fn camera_origin_lands_above_table() {
        // table 0.8 m in front of a camera looking along +z
        let t = plane_alignment_transform(&Plane::new(Vec3::z(), 0.8).unwrap());
        assert!((transform_point(&t, &Vec3::zeros()).z - 0.8).abs() < 1e-12);
        assert!(transform_point(&t, &Vec3::new(0.1, 0.2, 0.8)).z.abs() < 1e-12);
    }
}
