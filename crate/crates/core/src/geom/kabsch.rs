use super::{centroid, pose, GeomError, Pose, Rotation, Vec3};
use nalgebra::Matrix3;

/// Least-squares rigid fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidFit {
    pub pose: Pose,
    /// Source points are (nearly) collinear, so rotation about their line is
    /// unconstrained and `pose` is one of many minimizers.
    pub degenerate: bool,
}

/// Rigid pose minimizing `sum |dst_i - T src_i|^2` over paired points.
///
/// Uses the SVD of the cross-covariance with a determinant correction so the
/// result is never a reflection.
pub fn kabsch_align(src: &[Vec3], dst: &[Vec3]) -> Result<RigidFit, GeomError> {
    if src.len() != dst.len() {
        return Err(GeomError::CountMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(GeomError::InsufficientPoints { needed: 3, got: src.len() });
    }
    let cs = centroid(src).expect("non-empty");
    let cd = centroid(dst).expect("non-empty");
    let mut h = Matrix3::zeros();
    let mut spread = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let a = s - cs;
        h += a * (d - cd).transpose();
        spread += a.norm_squared();
    }
    let svd = h.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    // Rank of the centered source decides degeneracy, not the covariance,
    // since dst may legitimately collapse.
    let degenerate = source_rank_deficient(src, &cs, spread);

    let v = v_t.transpose();
    let det = (v * u.transpose()).determinant();
    let d = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, det.signum()));
    let r = v * d * u.transpose();
    let rotation = Rotation::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(r));
    let translation = cd - rotation * cs;
    Ok(RigidFit { pose: pose(rotation, translation), degenerate })
}

fn source_rank_deficient(src: &[Vec3], c: &Vec3, spread: f64) -> bool {
    if spread <= 0.0 {
        return true;
    }
    let mut cov = Matrix3::zeros();
    for s in src {
        let a = s - c;
        cov += a * a.transpose();
    }
    let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[1] <= 1e-12 * ev[0].max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{geodesic_distance, transform_point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        let axis = Vec3::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let r = Rotation::from_scaled_axis(axis.normalize() * rng.random_range(0.0..3.1));
        pose(r, Vec3::new(rng.random(), rng.random(), rng.random()))
    }

    #[test]
    fn identity_for_equal_sets() {
        let pts = vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 2.0, 0.0),
            Vec3::new(0.0, 0.0, 3.0),
        ];
        let fit = kabsch_align(&pts, &pts).unwrap();
        assert!(fit.pose.rotation.angle() < 1e-12);
        assert!(fit.pose.translation.vector.norm() < 1e-12);
        assert!(!fit.degenerate);
    }

    #[test]
    fn recovers_known_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let t = random_pose(&mut rng);
            let src: Vec<Vec3> = (0..20).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
            let dst: Vec<Vec3> = src.iter().map(|p| transform_point(&t, p)).collect();
            let fit = kabsch_align(&src, &dst).unwrap();
            assert!(geodesic_distance(&fit.pose.rotation, &t.rotation) < 1e-9);
            assert!((fit.pose.translation.vector - t.translation.vector).norm() < 1e-9);
        }
    }

    #[test]
    fn count_mismatch_rejected() {
        let a = vec![Vec3::zeros(); 3];
        let b = vec![Vec3::zeros(); 4];
        assert_eq!(kabsch_align(&a, &b), Err(GeomError::CountMismatch(3, 4)));
    }

    #[test]
    fn collinear_source_is_flagged() {
        let src: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let dst: Vec<Vec3> = src.iter().map(|p| p + Vec3::new(0.0, 1.0, 0.0)).collect();
        let fit = kabsch_align(&src, &dst).unwrap();
        assert!(fit.degenerate);
        for (s, d) in src.iter().zip(&dst) {
            assert!((transform_point(&fit.pose, s) - d).norm() < 1e-9);
        }
    }

    #[test]
    fn no_reflection_for_mirrored_target() {
        let src = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, 0.0),
        ];
        let dst: Vec<Vec3> = src.iter().map(|p| Vec3::new(-p.x, p.y, p.z)).collect();
        let fit = kabsch_align(&src, &dst).unwrap();
        assert!((fit.pose.rotation.to_rotation_matrix().matrix().determinant() - 1.0).abs() < 1e-12);
    }
}
