use oog_core::geom::{geodesic_distance, pose, Pose, Rotation, Vec3};
use oog_core::par::Parallelism;
use oog_core::register::{ransac_register, RegistrationConfig};
use oog_core::sim::Shape;
use proptest::prelude::*;

const ASYMMETRIC: [Shape; 3] = [Shape::Mug, Shape::LBlock, Shape::JuiceBox];

fn rigid() -> impl Strategy<Value = Pose> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -0.2..0.2f64, -0.2..0.2f64, -0.2..0.2f64)
        .prop_map(|(a, b, c, x, y, z)| pose(Rotation::from_scaled_axis(Vec3::new(a, b, c) * 0.5), Vec3::new(x, y, z)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn noise_free_pose_is_recovered(shape in 0usize..3, t in rigid(), seed in 0u64..100) {
        let src = ASYMMETRIC[shape].model();
        let dst = src.transformed(&t);
        let r = ransac_register(src, &dst, &RegistrationConfig { seed, ..Default::default() }).unwrap();
        prop_assert!(geodesic_distance(&r.transform.rotation, &t.rotation) < 1e-3);
        prop_assert!(r.fitness > 0.9);
    }

    #[test]
    fn moving_the_source_composes(shape in 0usize..3, t in rigid(), q in rigid()) {
        let src = ASYMMETRIC[shape].model();
        let dst = src.transformed(&t);
        let cfg = RegistrationConfig::default();
        let base = ransac_register(src, &dst, &cfg).unwrap();
        let moved = ransac_register(&src.transformed(&q), &dst, &cfg).unwrap();
        let expect = base.transform * q.inverse();
        prop_assert!(geodesic_distance(&moved.transform.rotation, &expect.rotation) < 2e-3);
        prop_assert!((moved.transform.translation.vector - expect.translation.vector).norm() < 1e-3);
    }
}

#[test]
fn same_seed_same_result_in_both_modes() {
    let src = Shape::Mug.model();
    let t = pose(Rotation::from_euler_angles(0.3, -0.2, 1.1), Vec3::new(0.05, -0.1, 0.02));
    let dst = src.transformed(&t);
    let run = |parallelism| {
        ransac_register(src, &dst, &RegistrationConfig { seed: 9, parallelism, ..Default::default() }).unwrap()
    };
    let a = run(Parallelism::Parallel);
    assert_eq!(a, run(Parallelism::Parallel));
    assert_eq!(a, run(Parallelism::Sequential));
}
