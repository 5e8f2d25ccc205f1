//! Static k-d tree over 3-D points.

use crate::geom::Vec3;
use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;
use std::num::NonZero;

type Tree = ImmutableKdTree<f64, u32, 3, 32>;

/// Nearest-neighbour index; query results carry Euclidean (not squared)
/// distances and indices into the original slice.
pub struct SpatialIndex {
    tree: Option<Tree>,
    len: usize,
}

impl SpatialIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let raw: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        let tree = (!raw.is_empty()).then(|| Tree::new_from_slice(&raw));
        Self { tree, len: points.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        let tree = self.tree.as_ref()?;
        let nn = tree.nearest_one::<SquaredEuclidean>(&[q.x, q.y, q.z]);
        Some((nn.item as usize, nn.distance.sqrt()))
    }

    /// Up to `k` nearest points sorted by distance.
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<(usize, f64)> {
        let (Some(tree), Some(k)) = (self.tree.as_ref(), NonZero::new(k)) else {
            return Vec::new();
        };
        tree.nearest_n::<SquaredEuclidean>(&[q.x, q.y, q.z], k)
            .into_iter()
            .map(|nn| (nn.item as usize, nn.distance.sqrt()))
            .collect()
    }

    /// All points within `radius` (inclusive), sorted by distance then index.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<(usize, f64)> {
        let Some(tree) = self.tree.as_ref() else {
            return Vec::new();
        };
        let mut out: Vec<(usize, f64)> = tree
            .within_unsorted::<SquaredEuclidean>(&[q.x, q.y, q.z], radius * radius)
            .into_iter()
            .map(|nn| (nn.item as usize, nn.distance.sqrt()))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(points: &[Vec3], q: &Vec3) -> f64 {
        points.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec3> = (0..500).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let idx = SpatialIndex::new(&pts);
        for _ in 0..200 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random());
            let (_, d) = idx.nearest(&q).unwrap();
            assert!((d - brute_nearest(&pts, &q)).abs() < 1e-12);
            let within = idx.within(&q, 0.1);
            let brute = pts.iter().filter(|p| (*p - q).norm() <= 0.1).count();
            assert_eq!(within.len(), brute);
            let knn = idx.knn(&q, 5);
            assert_eq!(knn.len(), 5);
            assert!((knn[0].1 - d).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_index_returns_nothing() {
        let idx = SpatialIndex::new(&[]);
        assert!(idx.nearest(&Vec3::zeros()).is_none());
        assert!(idx.knn(&Vec3::zeros(), 3).is_empty());
    }

    #[test]
    fn planar_duplicates_are_fine() {
        let pts: Vec<Vec3> = (0..2000).map(|i| Vec3::new((i % 7) as f64, 0.0, 0.0)).collect();
        let idx = SpatialIndex::new(&pts);
        assert_eq!(idx.within(&Vec3::zeros(), 0.5).len(), pts.iter().filter(|p| p.x == 0.0).count());
    }
}
