//! Global rigid registration of object clouds from geometry alone: k-NN
//! normals, 33-bin FPFH descriptors, mutual descriptor matches and seeded
//! RANSAC over 3-correspondence hypotheses, backed up by principal-axis
//! alignments. Every candidate is polished with nearest-neighbour ICP and
//! the one overlapping the destination best wins.

use crate::geom::{kabsch_align, pose, transform_point, PointCloud, Pose, Rotation, Vec3};
use crate::par::{best_by_chunks, map_range, map_slice, Parallelism};
use crate::spatial::SpatialIndex;
use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const FPFH_BINS: usize = 33;
const SUB_BINS: usize = 11;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegisterError {
    #[error("need more than {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("{normals} normals for {points} points")]
    NormalCount { normals: usize, points: usize },
    #[error("too few descriptor matches and no usable principal axes")]
    NoCorrespondences,
    #[error("no consensus: best fitness {fitness:.3} is below {min:.3}")]
    NoConsensus { fitness: f64, min: f64 },
    #[error("invalid registration setting: {0}")]
    Config(String),
}

/// Unit normal per point, index-aligned with the cloud.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalCloud(pub Vec<Vec3>);

/// Sign convention for estimated normals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalOrientation {
    /// Point toward a sensor position.
    TowardViewpoint(#[serde(with = "crate::io::vec3")] Vec3),
    /// Point away from the cloud centroid. Moves rigidly with the cloud.
    AwayFromCentroid,
}

impl Default for NormalOrientation {
    fn default() -> Self {
        NormalOrientation::TowardViewpoint(Vec3::zeros())
    }
}

/// Smallest-eigenvector normals of each point's `k`-neighbourhood.
pub fn estimate_normals(
    cloud: &PointCloud,
    k: usize,
    orientation: NormalOrientation,
) -> Result<NormalCloud, RegisterError> {
    if k < 3 || cloud.len() <= k {
        return Err(RegisterError::TooFewPoints { needed: k.max(3), got: cloud.len() });
    }
    let index = SpatialIndex::new(&cloud.points);
    let center = cloud.centroid().unwrap_or_default();
    let normals = cloud
        .points
        .iter()
        .map(|p| {
            let nn = index.knn(p, k);
            let mean = nn.iter().map(|&(i, _)| cloud.points[i]).sum::<Vec3>() / nn.len() as f64;
            let cov = nn.iter().fold(Matrix3::zeros(), |acc, &(i, _)| {
                let d = cloud.points[i] - mean;
                acc + d * d.transpose()
            });
            let eig = cov.symmetric_eigen();
            let imin = eig.eigenvalues.imin();
            let n: Vec3 = eig.eigenvectors.column(imin).normalize();
            let toward = match orientation {
                NormalOrientation::TowardViewpoint(v) => v - p,
                NormalOrientation::AwayFromCentroid => p - center,
            };
            if n.dot(&toward) < 0.0 {
                -n
            } else {
                n
            }
        })
        .collect();
    Ok(NormalCloud(normals))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureDescriptor {
    pub histogram: [f64; FPFH_BINS],
    /// No neighbour inside the feature radius; the histogram is all zeros
    /// and the point is left out of matching.
    pub isolated: bool,
}

/// Darboux-frame angles `(alpha, phi, theta)` of an oriented point pair.
fn pair_features(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<[f64; 3]> {
    let mut dp = p2 - p1;
    let dist = dp.norm();
    if dist == 0.0 {
        return None;
    }
    let (mut a, mut b) = (*n1, *n2);
    let angle1 = a.dot(&dp) / dist;
    let angle2 = b.dot(&dp) / dist;
    // symmetric pairs (e.g. across a cylinder) tie exactly; rounding must not
    // decide the frame
    let phi = if angle1.abs() < angle2.abs() - 1e-9 {
        std::mem::swap(&mut a, &mut b);
        dp = -dp;
        -angle2
    } else {
        angle1
    };
    let v = dp.cross(&a);
    let vn = v.norm();
    if vn == 0.0 {
        return None;
    }
    let v = v / vn;
    let w = a.cross(&v);
    let theta = v.dot(&b);
    let alpha = w.dot(&b).atan2(a.dot(&b));
    Some([alpha, phi, theta])
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = (SUB_BINS as f64 * (value - lo) / (hi - lo)).floor();
    b.clamp(0.0, (SUB_BINS - 1) as f64) as usize
}

/// Two-pass FPFH: per-point simplified histograms, then each point adds the
/// `1/distance`-weighted mix of its neighbours' histograms. Neighbourhoods
/// are the points within `radius`, capped at the `max_neighbors` closest.
pub fn compute_fpfh(
    cloud: &PointCloud,
    normals: &NormalCloud,
    radius: f64,
    max_neighbors: Option<usize>,
    par: Parallelism,
) -> Result<Vec<FeatureDescriptor>, RegisterError> {
    if normals.0.len() != cloud.len() {
        return Err(RegisterError::NormalCount { normals: normals.0.len(), points: cloud.len() });
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(RegisterError::Config(format!("feature radius must be > 0, got {radius}")));
    }
    let pts = &cloud.points;
    let nrm = &normals.0;
    let index = SpatialIndex::new(pts);
    let neighbours: Vec<Vec<(usize, f64)>> = map_range(par, pts.len(), |i| {
        let found = match max_neighbors {
            Some(k) => index.knn(&pts[i], k + 1).into_iter().filter(|&(_, d)| d <= radius).collect(),
            None => index.within(&pts[i], radius),
        };
        found.into_iter().filter(|&(j, d)| j != i && d > 0.0).collect()
    });
    let spfh: Vec<[f64; FPFH_BINS]> = map_range(par, pts.len(), |i| {
        let mut h = [0.0; FPFH_BINS];
        let nb = &neighbours[i];
        if nb.is_empty() {
            return h;
        }
        let incr = 100.0 / nb.len() as f64;
        for &(j, _) in nb {
            if let Some([alpha, phi, theta]) = pair_features(&pts[i], &nrm[i], &pts[j], &nrm[j]) {
                h[bin(alpha, -PI, PI)] += incr;
                h[SUB_BINS + bin(theta, -1.0, 1.0)] += incr;
                h[2 * SUB_BINS + bin(phi, -1.0, 1.0)] += incr;
            }
        }
        h
    });
    Ok(map_range(par, pts.len(), |i| {
        let nb = &neighbours[i];
        if nb.is_empty() {
            return FeatureDescriptor { histogram: [0.0; FPFH_BINS], isolated: true };
        }
        let mut mix = [0.0; FPFH_BINS];
        for &(j, d) in nb {
            for (m, s) in mix.iter_mut().zip(&spfh[j]) {
                *m += s / d;
            }
        }
        for block in mix.chunks_mut(SUB_BINS) {
            let total: f64 = block.iter().sum();
            if total > 0.0 {
                block.iter_mut().for_each(|v| *v *= 100.0 / total);
            }
        }
        let mut histogram = spfh[i];
        for (h, m) in histogram.iter_mut().zip(&mix) {
            *h += m;
        }
        FeatureDescriptor { histogram, isolated: false }
    }))
}

/// Each point replaced by the centroid of its `k` nearest neighbours.
pub fn smooth(cloud: &PointCloud, k: usize) -> PointCloud {
    let index = SpatialIndex::new(&cloud.points);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let nn = index.knn(p, k);
            nn.iter().map(|&(i, _)| cloud.points[i]).sum::<Vec3>() / nn.len() as f64
        })
        .collect();
    PointCloud { points, colors: cloud.colors.clone() }
}

/// Median distance from each point to its nearest other point.
pub fn median_nn_spacing(cloud: &PointCloud) -> Option<f64> {
    if cloud.len() < 2 {
        return None;
    }
    let index = SpatialIndex::new(&cloud.points);
    let mut d: Vec<f64> = cloud.points.iter().map(|p| index.knn(p, 2)[1].1).collect();
    d.sort_by(f64::total_cmp);
    Some(d[d.len() / 2])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistrationConfig {
    pub seed: u64,
    pub max_iterations: usize,
    /// meters
    pub distance_threshold: f64,
    /// Replace each point by the centroid of its `k` nearest neighbours
    /// in both clouds before anything else, to suppress sensor noise.
    pub smoothing_neighbors: Option<usize>,
    /// meters; `None` picks `radius_factor` times the median
    /// nearest-neighbour spacing of the (downsampled) source cloud.
    pub feature_radius: Option<f64>,
    pub radius_factor: f64,
    pub normal_neighbors: usize,
    /// Cap on FPFH neighbourhood size.
    pub feature_max_neighbors: Option<usize>,
    /// Keep only descriptor matches that are nearest neighbours both ways.
    pub mutual_filter: bool,
    /// Also try aligning principal axes, which survives noise levels that
    /// scramble local descriptors.
    pub moment_hypotheses: bool,
    pub early_exit_fitness: f64,
    pub min_fitness: f64,
    /// Stop once this probability of having drawn an all-inlier sample is
    /// reached at the current best inlier ratio.
    pub confidence: f64,
    /// Minimum ratio between matching edge lengths of a sample.
    pub edge_similarity: f64,
    /// Least-squares passes over nearest-neighbour inliers after RANSAC;
    /// stops early once a pass no longer moves the estimate.
    pub refine_passes: usize,
    pub parallelism: Parallelism,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iterations: 100_000,
            distance_threshold: 0.01,
            smoothing_neighbors: Some(20),
            feature_radius: None,
            radius_factor: 12.0,
            normal_neighbors: 40,
            feature_max_neighbors: Some(60),
            mutual_filter: true,
            moment_hypotheses: true,
            early_exit_fitness: 0.9,
            min_fitness: 0.5,
            confidence: 0.999,
            edge_similarity: 0.9,
            refine_passes: 30,
            parallelism: Parallelism::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Maps source points onto the destination.
    #[serde(with = "crate::io::pose")]
    pub transform: Pose,
    /// Source points whose nearest destination point lies within the
    /// distance threshold after alignment.
    pub inlier_count: usize,
    /// Nearest-neighbour pairs scored, one per source point.
    pub correspondence_count: usize,
    /// `inlier_count / correspondence_count`
    pub fitness: f64,
}

const MIN_POINTS: usize = 10;

fn descriptors(
    cloud: &PointCloud,
    radius: f64,
    cfg: &RegistrationConfig,
) -> Result<Vec<FeatureDescriptor>, RegisterError> {
    let normals =
        estimate_normals(cloud, cfg.normal_neighbors.min(cloud.len() - 1), NormalOrientation::AwayFromCentroid)?;
    compute_fpfh(cloud, &normals, radius, cfg.feature_max_neighbors, cfg.parallelism)
}

struct FeatureIndex {
    tree: ImmutableKdTree<f64, u32, FPFH_BINS, 32>,
    ids: Vec<usize>,
}

impl FeatureIndex {
    fn new(desc: &[FeatureDescriptor]) -> Option<Self> {
        let (ids, hist): (Vec<usize>, Vec<[f64; FPFH_BINS]>) =
            desc.iter().enumerate().filter(|(_, d)| !d.isolated).map(|(i, d)| (i, d.histogram)).unzip();
        if ids.is_empty() {
            return None;
        }
        Some(Self { tree: ImmutableKdTree::new_from_slice(&hist), ids })
    }

    fn nearest(&self, q: &[f64; FPFH_BINS]) -> usize {
        self.ids[self.tree.nearest_one::<SquaredEuclidean>(q).item as usize]
    }
}

/// Nearest neighbours in descriptor space from every source point, as
/// `(src, dst)` pairs; with `mutual`, only pairs that agree both ways.
pub fn descriptor_matches(
    src: &[FeatureDescriptor],
    dst: &[FeatureDescriptor],
    mutual: bool,
    par: Parallelism,
) -> Vec<(usize, usize)> {
    let (Some(si), Some(di)) = (FeatureIndex::new(src), FeatureIndex::new(dst)) else {
        return Vec::new();
    };
    map_range(par, src.len(), |i| {
        if src[i].isolated {
            return None;
        }
        let j = di.nearest(&src[i].histogram);
        (!mutual || si.nearest(&dst[j].histogram) == i).then_some((i, j))
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Samples needed to hit an all-inlier triple with probability `confidence`.
fn required_iterations(inliers: usize, total: usize, confidence: f64) -> usize {
    if confidence >= 1.0 || total == 0 {
        return usize::MAX;
    }
    let w = inliers as f64 / total as f64;
    let p_good = w * w * w;
    if p_good <= 0.0 {
        return usize::MAX;
    }
    if p_good >= 1.0 {
        return 0;
    }
    let n = (1.0 - confidence).ln() / (1.0 - p_good).ln();
    if n.is_finite() {
        n.ceil() as usize
    } else {
        usize::MAX
    }
}

fn draw_samples(n: usize, count: usize, seed: u64) -> Vec<[usize; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let mut c = rng.random_range(0..n - 2);
            for m in [a.min(b), a.max(b)] {
                if c >= m {
                    c += 1;
                }
            }
            [a, b, c]
        })
        .collect()
}

/// Estimate the pose taking `src` onto `dst`. Deterministic for a seed,
/// whatever the parallelism.
pub fn ransac_register(
    src: &PointCloud,
    dst: &PointCloud,
    cfg: &RegistrationConfig,
) -> Result<RegistrationResult, RegisterError> {
    for c in [src, dst] {
        if c.len() < MIN_POINTS {
            return Err(RegisterError::TooFewPoints { needed: MIN_POINTS, got: c.len() });
        }
    }
    if !(cfg.distance_threshold.is_finite() && cfg.distance_threshold > 0.0) || cfg.max_iterations == 0 {
        return Err(RegisterError::Config("threshold and iteration count must be positive".into()));
    }
    let (src, dst) = match cfg.smoothing_neighbors {
        Some(k) if k > 1 => (smooth(src, k), smooth(dst, k)),
        _ => (src.clone(), dst.clone()),
    };
    let (src, dst) = (&src, &dst);
    let radius = match cfg.feature_radius {
        Some(r) => r,
        None => cfg.radius_factor * median_nn_spacing(src).unwrap_or(0.0),
    };
    let fs = descriptors(src, radius, cfg)?;
    let fd = descriptors(dst, radius, cfg)?;
    let corr = descriptor_matches(&fs, &fd, cfg.mutual_filter, cfg.parallelism);
    let mut candidates = Vec::new();
    if corr.len() >= 3 {
        candidates.extend(ransac_hypothesis(src, dst, &corr, cfg));
    }
    if cfg.moment_hypotheses {
        candidates.extend(moment_hypotheses(src, dst));
    }
    if candidates.is_empty() {
        return Err(if corr.len() < 3 {
            RegisterError::NoCorrespondences
        } else {
            RegisterError::NoConsensus { fitness: 0.0, min: cfg.min_fitness }
        });
    }
    let dst_index = SpatialIndex::new(&dst.points);
    let scored = map_slice(cfg.parallelism, &candidates, |t| {
        let t = refine(src, dst, &dst_index, *t, cfg);
        (overlap(src, &dst_index, &t, cfg.distance_threshold), t)
    });
    // first candidate wins ties, so RANSAC is preferred over moments
    let (best, transform) =
        scored.into_iter().reduce(|a, b| if b.0.better_than(&a.0) { b } else { a }).expect("non-empty candidates");
    let fitness = best.inliers as f64 / src.len() as f64;
    if fitness < cfg.min_fitness {
        return Err(RegisterError::NoConsensus { fitness, min: cfg.min_fitness });
    }
    Ok(RegistrationResult { transform, inlier_count: best.inliers, correspondence_count: src.len(), fitness })
}

/// Best 3-correspondence hypothesis by correspondence inlier count.
fn ransac_hypothesis(
    src: &PointCloud,
    dst: &PointCloud,
    corr: &[(usize, usize)],
    cfg: &RegistrationConfig,
) -> Option<Pose> {
    let a: Vec<Vec3> = corr.iter().map(|&(i, _)| src.points[i]).collect();
    let b: Vec<Vec3> = corr.iter().map(|&(_, j)| dst.points[j]).collect();
    let thr2 = cfg.distance_threshold * cfg.distance_threshold;
    let count_inliers =
        |t: &Pose| a.iter().zip(&b).filter(|(p, q)| (transform_point(t, p) - *q).norm_squared() < thr2).count();
    let samples = draw_samples(corr.len(), cfg.max_iterations, cfg.seed);
    let hypothesis = |s: &[usize; 3]| -> Option<Pose> {
        for (x, y) in [(0, 1), (1, 2), (0, 2)] {
            let ls = (a[s[x]] - a[s[y]]).norm();
            let ld = (b[s[x]] - b[s[y]]).norm();
            if ls.min(ld) < cfg.edge_similarity * ls.max(ld) {
                return None;
            }
        }
        let fit = kabsch_align(&[a[s[0]], a[s[1]], a[s[2]]], &[b[s[0]], b[s[1]], b[s[2]]]).ok()?;
        (!fit.degenerate).then_some(fit.pose)
    };
    let early = (cfg.early_exit_fitness * corr.len() as f64).ceil() as usize;
    let (h, _) = best_by_chunks(
        cfg.parallelism,
        samples.len(),
        256,
        |h| hypothesis(&samples[h]).map(|t| count_inliers(&t)),
        |&n, done| n >= early || done >= required_iterations(n, corr.len(), cfg.confidence),
    )?;
    hypothesis(&samples[h])
}

/// Centroid and principal axes (columns, ascending variance, right-handed).
fn principal_frame(c: &PointCloud) -> Option<(Vec3, Matrix3<f64>)> {
    let mean = c.centroid()?;
    let cov: Matrix3<f64> = c.points.iter().map(|p| (p - mean) * (p - mean).transpose()).sum();
    let eig = cov.symmetric_eigen();
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut axes = Matrix3::from_columns(&order.map(|i| eig.eigenvectors.column(i).into_owned()));
    if axes.determinant() < 0.0 {
        axes.set_column(2, &-axes.column(2));
    }
    Some((mean, axes))
}

/// The four proper rotations matching the principal axes of `src` to those
/// of `dst`, one per sign ambiguity.
fn moment_hypotheses(src: &PointCloud, dst: &PointCloud) -> Vec<Pose> {
    let (Some((cs, es)), Some((cd, ed))) = (principal_frame(src), principal_frame(dst)) else {
        return Vec::new();
    };
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .into_iter()
        .map(|s| {
            let r = ed * Matrix3::from_diagonal(&Vec3::from(s)) * es.transpose();
            let r = Rotation::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
            pose(r, cd - r * cs)
        })
        .collect()
}

/// Nearest-neighbour least squares from `init`, first with a wide inlier
/// gate to pull in rough starts, then at the registration threshold.
fn refine(src: &PointCloud, dst: &PointCloud, index: &SpatialIndex, init: Pose, cfg: &RegistrationConfig) -> Pose {
    let mut transform = init;
    for gate in [4.0, 2.0, 1.0].map(|f| f * cfg.distance_threshold) {
        for _ in 0..cfg.refine_passes {
            let (ia, ib): (Vec<Vec3>, Vec<Vec3>) = src
                .points
                .iter()
                .filter_map(|p| {
                    let (j, d) = index.nearest(&transform_point(&transform, p))?;
                    (d < gate).then_some((*p, dst.points[j]))
                })
                .unzip();
            match kabsch_align(&ia, &ib) {
                Ok(fit) if !fit.degenerate => {
                    let step = fit.pose * transform.inverse();
                    transform = fit.pose;
                    if step.translation.vector.norm() < 1e-7 && step.rotation.angle() < 1e-7 {
                        break;
                    }
                }
                _ => break,
            }
        }
    }
    transform
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Overlap {
    inliers: usize,
    sq_error: f64,
}

impl Overlap {
    /// More source points within the threshold, then lower residual.
    fn better_than(&self, other: &Overlap) -> bool {
        self.inliers > other.inliers || (self.inliers == other.inliers && self.sq_error < other.sq_error)
    }
}

fn overlap(src: &PointCloud, index: &SpatialIndex, t: &Pose, threshold: f64) -> Overlap {
    let mut out = Overlap { inliers: 0, sq_error: 0.0 };
    for p in &src.points {
        if let Some((_, d)) = index.nearest(&transform_point(t, p)) {
            if d < threshold {
                out.inliers += 1;
                out.sq_error += d * d;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{geodesic_distance, pose, Rotation};
    use crate::sim::shapes::Shape;

    fn test_pose() -> Pose {
        let axis = nalgebra::Unit::new_normalize(Vec3::new(0.3, -0.8, 0.5));
        pose(Rotation::from_axis_angle(&axis, 2.1), Vec3::new(0.2, -0.1, 0.35))
    }

    #[test]
    fn plane_normals_point_at_viewpoint() {
        let pts: Vec<Vec3> = (0..100).map(|i| Vec3::new((i % 10) as f64 * 0.01, (i / 10) as f64 * 0.01, 0.0)).collect();
        let up = estimate_normals(
            &PointCloud::new(pts.clone()),
            8,
            NormalOrientation::TowardViewpoint(Vec3::new(0.0, 0.0, 1.0)),
        )
        .unwrap();
        assert!(up.0.iter().all(|n| (n - Vec3::z()).norm() < 1e-9));
        let down =
            estimate_normals(&PointCloud::new(pts), 8, NormalOrientation::TowardViewpoint(Vec3::new(0.0, 0.0, -1.0)))
                .unwrap();
        assert!(down.0.iter().all(|n| (n + Vec3::z()).norm() < 1e-9));
    }

    #[test]
    fn sphere_normals_are_radial() {
        let golden = PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Vec3> = (0..400)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / 400.0;
                let r = (1.0 - z * z).sqrt();
                Vec3::new(r * (golden * i as f64).cos(), r * (golden * i as f64).sin(), z)
            })
            .collect();
        let n = estimate_normals(&PointCloud::new(pts.clone()), 10, NormalOrientation::AwayFromCentroid).unwrap();
        for (p, n) in pts.iter().zip(&n.0) {
            assert!(p.dot(n) > 0.99);
        }
    }

    #[test]
    fn too_few_points_for_normals() {
        let c = PointCloud::new(vec![Vec3::zeros(); 5]);
        assert!(matches!(
            estimate_normals(&c, 10, NormalOrientation::default()),
            Err(RegisterError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn descriptors_are_rigidly_invariant() {
        let cloud = Shape::Mug.cloud();
        let t = test_pose();
        let moved = cloud.transformed(&t);
        let n1 = estimate_normals(&cloud, 20, NormalOrientation::AwayFromCentroid).unwrap();
        let n2 = NormalCloud(n1.0.iter().map(|n| t.rotation * n).collect());
        let d1 = compute_fpfh(&cloud, &n1, 0.03, None, Parallelism::Sequential).unwrap();
        let d2 = compute_fpfh(&moved, &n2, 0.03, None, Parallelism::Sequential).unwrap();
        for (a, b) in d1.iter().zip(&d2) {
            let diff = a.histogram.iter().zip(&b.histogram).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-6, "{diff}");
        }
    }

    #[test]
    fn isolated_point_has_zero_histogram() {
        let mut pts: Vec<Vec3> = (0..50)
            .map(|i| Vec3::new((i % 7) as f64 * 0.01, (i / 7) as f64 * 0.01, ((i * 3) % 5) as f64 * 0.002))
            .collect();
        pts.push(Vec3::new(5.0, 5.0, 5.0));
        let c = PointCloud::new(pts);
        let n = estimate_normals(&c, 5, NormalOrientation::default()).unwrap();
        let d = compute_fpfh(&c, &n, 0.05, None, Parallelism::Sequential).unwrap();
        let last = d.last().unwrap();
        assert!(last.isolated);
        assert!(last.histogram.iter().all(|&v| v == 0.0));
        assert!(!d[0].isolated);
        // each of the three blocks of the own part sums to 100
        let total: f64 = d[0].histogram.iter().sum();
        assert!(total > 0.0);
    }

    #[test]
    fn required_iterations_bounds() {
        assert_eq!(required_iterations(0, 10, 0.99), usize::MAX);
        assert_eq!(required_iterations(10, 10, 0.99), 0);
        // w = 0.5: 1 - 0.125 per draw
        let expect = ((0.01f64).ln() / (0.875f64).ln()).ceil() as usize;
        assert_eq!(required_iterations(5, 10, 0.99), expect);
    }

    #[test]
    fn samples_are_distinct_triples() {
        for s in draw_samples(5, 500, 3) {
            assert!(s[0] != s[1] && s[1] != s[2] && s[0] != s[2]);
            assert!(s.iter().all(|&i| i < 5));
        }
    }

    #[test]
    fn recovers_pose_and_is_deterministic() {
        let src = Shape::LBlock.cloud();
        let t = test_pose();
        let dst = src.transformed(&t);
        let cfg = RegistrationConfig::default();
        let r = ransac_register(&src, &dst, &cfg).unwrap();
        assert!(geodesic_distance(&r.transform.rotation, &t.rotation) < 1e-3);
        assert!((r.transform.translation.vector - t.translation.vector).norm() < 1e-3);
        let seq =
            ransac_register(&src, &dst, &RegistrationConfig { parallelism: Parallelism::Sequential, ..cfg }).unwrap();
        assert_eq!(r, seq);
    }

    #[test]
    fn unrelated_clouds_do_not_register() {
        let src = Shape::Mug.cloud();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dst =
            PointCloud::new((0..600).map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 0.3).collect());
        let out = ransac_register(&src, &dst, &RegistrationConfig::default());
        assert!(
            matches!(out, Err(RegisterError::NoConsensus { .. }) | Err(RegisterError::NoCorrespondences)),
            "{out:?}"
        );
    }

    #[test]
    fn tiny_clouds_rejected() {
        let c = PointCloud::new(vec![Vec3::zeros(); 4]);
        assert!(matches!(
            ransac_register(&c, &c, &RegistrationConfig::default()),
            Err(RegisterError::TooFewPoints { .. })
        ));
    }
}
