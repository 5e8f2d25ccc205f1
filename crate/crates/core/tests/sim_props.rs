use oog_core::geom::{pose, Rotation, Vec3};
use oog_core::oog::{min_distance, ObjectType, Relation};
use oog_core::policy::{ActionStep, Grip};
use oog_core::sim::Shape;
use oog_core::sim::{
    check_goal, home_pose, randomize_layout, synthesize_demo, DemoOptions, GoalSpec, PosePredicate, Region, SimConfig,
    SimObject, SimScene, TaskKind, TaskTemplate,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_4;
use std::sync::OnceLock;

fn template() -> &'static TaskTemplate {
    static T: OnceLock<TaskTemplate> = OnceLock::new();
    T.get_or_init(|| synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default()).template)
}

fn at(p: Vec3, grip: Grip) -> ActionStep {
    ActionStep::new(pose(home_pose().rotation, p), grip)
}

/// Grab the mug at its first surface point, then visit `waypoints`.
fn carry(scene: &SimScene, waypoints: &[Vec3]) -> Vec<ActionStep> {
    let grip_point = scene.object("mug").unwrap().cloud().points[0];
    std::iter::once(at(grip_point, Grip::Close))
        .chain(waypoints.iter().map(|w| at(grip_point + w, Grip::Hold)))
        .collect()
}

fn pairwise(scene: &SimScene, id: &str) -> Vec<f64> {
    let pts = scene.object(id).unwrap().cloud().points;
    (0..pts.len())
        .step_by(13)
        .flat_map(|i| (0..pts.len()).step_by(17).map(move |j| (i, j)))
        .map(|(i, j)| (pts[i] - pts[j]).norm())
        .collect()
}

fn step() -> impl Strategy<Value = Vec3> {
    (-0.1..0.1f64, -0.1..0.1f64, 0.0..0.2f64).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn execution_moves_objects_rigidly(seed in 0u64..1000, waypoints in prop::collection::vec(step(), 1..6)) {
        let mut scene = randomize_layout(template(), seed).unwrap();
        let before = pairwise(&scene, "mug");
        let report = scene.execute(&carry(&scene, &waypoints), &SimConfig::default());
        prop_assert!(!report.missed_grasp);
        let after = pairwise(&scene, "mug");
        prop_assert!(before.iter().zip(&after).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn execution_is_deterministic(seed in 0u64..1000, waypoints in prop::collection::vec(step(), 1..6)) {
        let start = randomize_layout(template(), seed).unwrap();
        let mut actions = carry(&start, &waypoints);
        actions.push(ActionStep::new(actions.last().unwrap().end_effector, Grip::Open));
        let run = || {
            let mut s = start.clone();
            let r = s.execute(&actions, &SimConfig::default());
            (s, r)
        };
        prop_assert_eq!(run(), run());
    }

    #[test]
    fn contact_goals_are_monotone_in_epsilon(seed in 0u64..1000, eps in 0.001..0.03f64, extra in 0.0..0.03f64) {
        let scene = randomize_layout(template(), seed).unwrap();
        let goal = GoalSpec { relations: vec![Relation::objects("coaster", "mug")], predicates: vec![] };
        if check_goal(&scene, &goal, eps) {
            prop_assert!(check_goal(&scene, &goal, eps + extra));
        }
    }
}

#[test]
fn grasped_object_follows_the_gripper() {
    let mut scene = template().scene.clone();
    let start = scene.object("mug").unwrap().pose;
    let report = scene.execute(&carry(&scene, &[Vec3::new(0.1, 0.0, 0.0)]), &SimConfig::default());
    assert!(!report.missed_grasp);
    let end = scene.object("mug").unwrap().pose;
    assert!((end.translation.vector - start.translation.vector - Vec3::new(0.1, 0.0, 0.0)).norm() < 1e-12);
}

#[test]
fn closing_far_from_everything_misses() {
    let mut scene = template().scene.clone();
    let report = scene.execute(&[at(Vec3::new(0.0, 0.0, 0.35), Grip::Close)], &SimConfig::default());
    assert!(report.missed_grasp);
    assert!(scene.attached.is_none());
}

#[test]
fn released_over_coaster_makes_contact() {
    let mut scene = template().scene.clone();
    let mug = scene.object("mug").unwrap().pose.translation.vector;
    let coaster = scene.object("coaster").unwrap().pose.translation.vector;
    let lift = Vec3::new(0.0, 0.0, 0.15);
    let mut actions = carry(&scene, &[lift, coaster - mug + lift, coaster - mug + Vec3::new(0.0, 0.0, 0.01)]);
    actions.push(ActionStep::new(actions.last().unwrap().end_effector, Grip::Open));
    scene.execute(&actions, &SimConfig::default());
    assert!(scene.relations(0.01).contains(&Relation::objects("mug", "coaster")));
}

#[test]
fn pushing_into_the_table_is_flagged_and_clamped() {
    let mut scene = template().scene.clone();
    let report = scene.execute(&carry(&scene, &[Vec3::new(0.0, 0.0, -0.05)]), &SimConfig::default());
    assert!(report.penetration);
    let lowest = scene.object("mug").unwrap().cloud().points.iter().map(|p| p.z).fold(f64::INFINITY, f64::min);
    assert!(lowest.abs() < 1e-12);
}

#[test]
fn noise_matches_requested_sigma() {
    let scene = template().scene.clone();
    let clean = scene.observe(0.0, &mut ChaCha8Rng::seed_from_u64(0));
    let mut d = Vec::new();
    for seed in 1..=8 {
        let noisy = scene.observe(0.005, &mut ChaCha8Rng::seed_from_u64(seed));
        for (a, b) in clean.objects.iter().zip(&noisy.objects) {
            d.extend(a.cloud.points.iter().zip(&b.cloud.points).map(|(p, q)| q - p));
        }
    }
    assert!(d.len() >= 10_000, "{} samples", d.len());
    let sd = (d.iter().map(|v| v.norm_squared()).sum::<f64>() / (3 * d.len()) as f64).sqrt();
    assert!((sd - 0.005).abs() < 0.0005, "sample sd {sd}");
    let noisy = scene.observe(0.005, &mut ChaCha8Rng::seed_from_u64(1));
    let again = scene.observe(0.005, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(again, noisy);
    for (o, m) in clean.objects.iter().zip(&scene.objects) {
        assert_eq!(o.cloud, m.cloud());
    }
}

#[test]
fn layouts_keep_clearance() {
    let t = template();
    for seed in 0..50 {
        let s = randomize_layout(t, seed).unwrap();
        let clouds: Vec<_> = s.objects.iter().map(|o| o.cloud()).collect();
        assert!(min_distance(&clouds[0], &clouds[1]).unwrap() >= t.clearance, "seed {seed}");
    }
    assert_ne!(randomize_layout(t, 1).unwrap(), randomize_layout(t, 2).unwrap());
}

#[test]
fn zero_width_regions_keep_the_template() {
    let mut t = template().clone();
    t.regions = t.scene.objects.iter().map(|o| Region::fixed(&o.id)).collect();
    assert_eq!(randomize_layout(&t, 5).unwrap(), t.scene);
}

#[test]
fn cramped_layout_fails_after_bounded_attempts() {
    let mut t = template().clone();
    t.clearance = 10.0;
    assert!(randomize_layout(&t, 0).is_err());
}

#[test]
fn tilted_box_over_cup_satisfies_pour_predicates() {
    let cup = SimObject {
        id: "cup".into(),
        name: "cup".into(),
        object_type: ObjectType::Reference,
        shape: Shape::Cup,
        pose: pose(Rotation::identity(), Vec3::new(0.3, 0.0, 0.0)),
    };
    let juice = SimObject {
        id: "juice".into(),
        name: "juice box".into(),
        object_type: ObjectType::Manipulate,
        shape: Shape::JuiceBox,
        pose: pose(Rotation::from_axis_angle(&Vec3::y_axis(), FRAC_PI_4 + 0.05), Vec3::new(0.25, 0.0, 0.15)),
    };
    let goal = |radius| GoalSpec {
        relations: vec![],
        predicates: vec![
            PosePredicate::Tilt { object: "juice".into(), min_degrees: 45.0 },
            PosePredicate::Over {
                object: "juice".into(),
                point: Vec3::new(0.0, 0.0, 0.1),
                container: "cup".into(),
                radius,
            },
        ],
    };
    let scene = SimScene::new(vec![cup, juice]);
    let spout = oog_core::geom::transform_point(&scene.object("juice").unwrap().pose, &Vec3::new(0.0, 0.0, 0.1));
    let reach = (spout.x - 0.3).hypot(spout.y);
    assert!(check_goal(&scene, &goal(reach + 0.01), 0.01));
    assert!(!check_goal(&scene, &goal(reach - 0.01), 0.01));
    let mut upright = scene.clone();
    upright.objects[1].pose.rotation = Rotation::identity();
    assert!(!check_goal(&upright, &goal(1.0), 0.01));
}
