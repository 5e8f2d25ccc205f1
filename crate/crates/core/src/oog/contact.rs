use crate::geom::PointCloud;
use crate::spatial::SpatialIndex;

/// Smallest distance between any point of `a` and any point of `b`.
pub fn min_distance(a: &PointCloud, b: &PointCloud) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let index = SpatialIndex::new(&large.points);
    small.points.iter().filter_map(|p| index.nearest(p).map(|(_, d)| d)).reduce(f64::min)
}

/// True iff the clouds come closer than `epsilon` somewhere.
pub fn contact(a: &PointCloud, b: &PointCloud, epsilon: f64) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let index = SpatialIndex::new(&large.points);
    small.points.iter().any(|p| index.nearest(p).is_some_and(|(_, d)| d < epsilon))
}
