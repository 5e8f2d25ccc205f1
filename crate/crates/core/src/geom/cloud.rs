use super::{transform_point, GeomError, Pose, Vec3};
use crate::spatial::SpatialIndex;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Points in meters with optional RGB colors in `[0, 1]`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    #[serde(with = "crate::io::vec3_list")]
    pub points: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub colors: Option<Vec<[f64; 3]>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, colors: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn centroid(&self) -> Option<Vec3> {
        super::centroid(&self.points)
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self { points: self.points.iter().map(|p| transform_point(pose, p)).collect(), colors: self.colors.clone() }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { points: self.points.iter().map(|p| p * s).collect(), colors: self.colors.clone() }
    }

    /// Subset by index, keeping colors aligned.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            colors: self.colors.as_ref().map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Axis-aligned `(min, max)` corners.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| (lo.inf(p), hi.sup(p))))
    }
}

/// Length of the axis-aligned bounding-box diagonal.
pub fn bbox_diagonal(cloud: &PointCloud) -> Result<f64, GeomError> {
    let (lo, hi) = cloud.bounds().ok_or(GeomError::Empty("bounding box of empty cloud"))?;
    Ok((hi - lo).norm())
}

/// Uniform factor that brings `vertices` to the metric size of `reference`.
pub fn scale_factor(reference: &PointCloud, vertices: &PointCloud) -> Result<f64, GeomError> {
    let p = bbox_diagonal(reference)?;
    let m = bbox_diagonal(vertices)?;
    if p <= 0.0 || m <= 0.0 {
        return Err(GeomError::ZeroDiagonal);
    }
    Ok(p / m)
}

/// Drop points whose mean distance to their `k` nearest neighbours exceeds
/// `mean + std_ratio * stddev` of that statistic over the whole cloud.
pub fn remove_statistical_outliers(
    cloud: &PointCloud,
    k_neighbors: usize,
    std_ratio: f64,
) -> Result<PointCloud, GeomError> {
    if cloud.len() <= k_neighbors || k_neighbors == 0 {
        return Err(GeomError::InsufficientPoints { needed: k_neighbors + 1, got: cloud.len() });
    }
    let index = SpatialIndex::new(&cloud.points);
    let mean_dist: Vec<f64> = cloud
        .points
        .iter()
        .map(|p| {
            // first hit is the point itself
            let nn = index.knn(p, k_neighbors + 1);
            nn.iter().skip(1).map(|(_, d)| d).sum::<f64>() / k_neighbors as f64
        })
        .collect();
    let n = mean_dist.len() as f64;
    let mu = mean_dist.iter().sum::<f64>() / n;
    let var = mean_dist.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let limit = mu + std_ratio * var.sqrt();
    let keep: Vec<usize> = (0..cloud.len()).filter(|&i| mean_dist[i] <= limit).collect();
    Ok(cloud.select(&keep))
}

/// Replace the points in each occupied voxel by their centroid.
///
/// Output order follows voxel coordinates, so it is deterministic.
pub fn voxel_downsample(cloud: &PointCloud, voxel: f64) -> PointCloud {
    if voxel <= 0.0 {
        return cloud.clone();
    }
    let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
    for p in &cloud.points {
        let key = ((p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64);
        let e = cells.entry(key).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    PointCloud::new(cells.into_values().map(|(s, n)| s / n as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_corners() -> PointCloud {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        PointCloud::new(pts)
    }

    #[test]
    fn diagonal_of_unit_cube() {
        assert!((bbox_diagonal(&cube_corners()).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(bbox_diagonal(&PointCloud::new(vec![Vec3::new(1.0, 2.0, 3.0)])).unwrap(), 0.0);
        assert!((bbox_diagonal(&cube_corners().scaled(2.0)).unwrap() - 2.0 * 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(bbox_diagonal(&PointCloud::default()), Err(GeomError::Empty("bounding box of empty cloud")));
    }

    #[test]
    fn scale_factor_cases() {
        let c = cube_corners();
        assert_eq!(scale_factor(&c, &c).unwrap(), 1.0);
        assert!((scale_factor(&c, &c.scaled(0.5)).unwrap() - 2.0).abs() < 1e-15);
        let flat = PointCloud::new(vec![Vec3::zeros(), Vec3::zeros()]);
        assert_eq!(scale_factor(&c, &flat), Err(GeomError::ZeroDiagonal));
    }

    #[test]
    fn outlier_removal_keeps_clean_cluster() {
        // evenly spread points on a small sphere: no boundary, no stragglers
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Vec3> = (0..300)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / 300.0;
                let r = (1.0 - z * z).sqrt();
                let a = golden * i as f64;
                Vec3::new(r * a.cos(), r * a.sin(), z) * 0.05
            })
            .collect();
        let cloud = PointCloud::new(pts.clone());
        let kept = remove_statistical_outliers(&cloud, 10, 3.0).unwrap();
        assert_eq!(kept.len(), cloud.len());

        let mut with_far = pts;
        with_far.push(Vec3::new(1.0, 0.0, 0.0));
        let cloud = PointCloud::new(with_far);
        let kept = remove_statistical_outliers(&cloud, 10, 2.0).unwrap();
        assert!(kept.points.iter().all(|p| p.norm() < 0.5));
        assert!(kept.len() >= 290);
    }

    #[test]
    fn outlier_removal_needs_more_than_k_points() {
        let c = cube_corners();
        assert!(matches!(remove_statistical_outliers(&c, 8, 1.0), Err(GeomError::InsufficientPoints { .. })));
    }

    #[test]
    fn voxel_grid_averages() {
        let c =
            PointCloud::new(vec![Vec3::new(0.01, 0.01, 0.01), Vec3::new(0.03, 0.03, 0.03), Vec3::new(0.51, 0.0, 0.0)]);
        let d = voxel_downsample(&c, 0.1);
        assert_eq!(d.len(), 2);
        assert!((d.points[0] - Vec3::new(0.02, 0.02, 0.02)).norm() < 1e-12);
    }
}
