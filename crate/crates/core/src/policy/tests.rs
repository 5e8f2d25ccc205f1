use super::*;
use crate::geom::{pose, Rotation, Vec3};
use crate::oog::{build_plan, FeatureTrajectory, PlanBuildConfig, PointNode};
use crate::sim::{synthesize_demo, DemoOptions, TaskKind};
use std::sync::OnceLock;

/// Mug-on-coaster plan: `{}`, `{mug-hand}`, `{mug-coaster, mug-hand}`,
/// `{mug-coaster}`.
fn plan(mode: CaptureMode) -> &'static Plan {
    static RGBD: OnceLock<Plan> = OnceLock::new();
    static RGB: OnceLock<Plan> = OnceLock::new();
    let cell = if mode == CaptureMode::Rgbd { &RGBD } else { &RGB };
    cell.get_or_init(|| {
        let demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions { mode, ..Default::default() });
        build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap()
    })
}

#[test]
fn matching_walks_the_plan() {
    let p = plan(CaptureMode::Rgbd);
    assert_eq!(p.oogs.len(), 4);
    let mut state = PolicyState::new(10);
    assert_eq!(find_matching_oog(&p.oogs[0], p, &mut state), Ok(PlanMatch::Segment(0)));
    assert_eq!(state.cursor, 0);
    assert_eq!(find_matching_oog(&p.oogs[2], p, &mut state), Ok(PlanMatch::Segment(2)));
    assert_eq!(find_matching_oog(&p.oogs[3], p, &mut state), Ok(PlanMatch::TaskComplete));
    assert_eq!(state.cursor, 3);
}

#[test]
fn earlier_steps_are_not_revisited() {
    let p = plan(CaptureMode::Rgbd);
    let mut state = PolicyState { cursor: 2, budget_remaining: 1 };
    assert!(matches!(find_matching_oog(&p.oogs[0], p, &mut state), Err(PolicyError::UnrecognizedState(_))));
    assert_eq!(state.cursor, 2);
}

#[test]
fn repeated_relation_set_resolved_by_cursor() {
    let base = plan(CaptureMode::Rgbd);
    let mut p = base.clone();
    // G_0, G_1, G_0 again, G_3
    p.oogs = vec![base.oogs[0].clone(), base.oogs[1].clone(), base.oogs[0].clone(), base.oogs[3].clone()];
    let mut state = PolicyState { cursor: 1, budget_remaining: 5 };
    assert_eq!(find_matching_oog(&base.oogs[0], &p, &mut state), Ok(PlanMatch::Segment(2)));
    assert_eq!(state.cursor, 2);
}

#[test]
fn moving_object_is_the_target() {
    let p = plan(CaptureMode::Rgbd);
    assert_eq!(identify_target_object(&p.oogs[1], &p.oogs[2], CaptureMode::Rgbd).unwrap(), "mug");
    let rgb = plan(CaptureMode::Rgb);
    assert_eq!(identify_target_object(&rgb.oogs[0], &rgb.oogs[1], CaptureMode::Rgb).unwrap(), "mug");
}

fn scaled_copy(points: &[PointNode], parent: &str, scale: f64) -> Vec<PointNode> {
    points
        .iter()
        .map(|p| {
            let FeatureTrajectory::Points(v) = &p.trajectory else { panic!("depth plan") };
            let first = v[0];
            let moved = v.iter().map(|q| first + (q - first) * scale).collect();
            PointNode {
                parent: parent.into(),
                keypoint_id: p.keypoint_id,
                trajectory: FeatureTrajectory::Points(moved),
            }
        })
        .collect()
}

#[test]
fn faster_object_wins_and_near_ties_are_rejected() {
    let p = plan(CaptureMode::Rgbd);
    let mut g = p.oogs[1].clone();
    let mug: Vec<PointNode> = g.points_of("mug").cloned().collect();
    g.points.retain(|n| n.parent != "coaster");
    g.points.extend(scaled_copy(&mug, "coaster", 0.25));
    assert_eq!(identify_target_object(&g, &p.oogs[2], CaptureMode::Rgbd).unwrap(), "mug");

    g.points.retain(|n| n.parent != "coaster");
    g.points.extend(scaled_copy(&mug, "coaster", 0.95));
    assert!(matches!(
        identify_target_object(&g, &p.oogs[2], CaptureMode::Rgbd),
        Err(PolicyError::AmbiguousTarget { .. })
    ));
}

#[test]
fn reference_comes_from_the_object_relation_change() {
    let p = plan(CaptureMode::Rgbd);
    assert_eq!(identify_reference_object(&p.oogs[1], &p.oogs[2], "mug").unwrap(), "coaster");
    assert_eq!(identify_reference_object(&p.oogs[0], &p.oogs[1], "mug"), Err(PolicyError::NoReference("mug".into())));
}

#[test]
fn observation_graph_matches_plan_graph_on_same_clouds() {
    let p = plan(CaptureMode::Rgbd);
    let g = &p.oogs[3];
    let obs = Observation {
        objects: g
            .objects
            .iter()
            .map(|o| ObservedObject {
                id: o.id.clone(),
                name: o.name.clone(),
                object_type: o.object_type,
                cloud: o.cloud.clone(),
                pose: o.pose,
            })
            .collect(),
        hand: None,
        end_effector: Pose::identity(),
        plane: None,
    };
    let seen = generate_observation_oog(&obs, p.epsilon_contact).unwrap();
    assert_eq!(seen.relation_set(), g.relation_set());
    assert!(seen.points.is_empty() && seen.grasp.is_empty());
}

#[test]
fn rgb_end_pose_identity_and_shift() {
    let demo = DemoPoses {
        target_start: pose(Rotation::from_euler_angles(0.1, 0.2, 0.3), Vec3::new(0.1, 0.0, 0.0)),
        target_end: pose(Rotation::from_euler_angles(0.0, 0.0, 1.0), Vec3::new(0.3, 0.1, 0.05)),
        reference_start: pose(Rotation::from_euler_angles(0.0, 0.0, 0.5), Vec3::new(0.3, 0.1, 0.0)),
        reference_end: pose(Rotation::from_euler_angles(0.0, 0.0, 0.5), Vec3::new(0.3, 0.1, 0.0)),
    };
    let same = rollout_end_pose_rgb(&demo, &demo.reference_end, Convention::NextKeyframe);
    assert!((same.to_homogeneous() - demo.target_end.to_homogeneous()).abs().max() < 1e-12);
    let same = rollout_end_pose_rgb(&demo, &demo.reference_start, Convention::Literal);
    assert!((same.to_homogeneous() - demo.target_start.to_homogeneous()).abs().max() < 1e-12);

    let shift = Vec3::new(0.0, -0.2, 0.0);
    let moved = pose(demo.reference_end.rotation, demo.reference_end.translation.vector + shift);
    let out = rollout_end_pose_rgb(&demo, &moved, Convention::NextKeyframe);
    assert!((out.translation.vector - demo.target_end.translation.vector - shift).norm() < 1e-12);
    assert!(out.rotation.angle_to(&demo.target_end.rotation) < 1e-12);
}

#[test]
fn grip_commands_follow_grasp_nodes() {
    let p = plan(CaptureMode::Rgbd);
    let motion = vec![Pose::identity(), pose(Rotation::identity(), Vec3::new(0.0, 0.0, 0.1))];
    let grips = |g0: usize, g1: usize| -> Vec<Grip> {
        attach_grip_commands(&motion, &p.oogs[g0], &p.oogs[g1], None).unwrap().iter().map(|a| a.grip).collect()
    };
    assert_eq!(grips(0, 1), vec![Grip::Close, Grip::Hold, Grip::Hold]);
    assert_eq!(grips(1, 2), vec![Grip::Hold, Grip::Hold]);
    assert_eq!(grips(2, 3), vec![Grip::Hold, Grip::Hold, Grip::Open]);

    let mut empty = p.oogs[1].clone();
    empty.grasp.grasp_points.clear();
    assert_eq!(attach_grip_commands(&motion, &p.oogs[0], &empty, None), Err(PolicyError::MissingGraspData));
}

#[test]
fn config_validation() {
    assert!(PolicyConfig::default().validate().is_ok());
    let cfg = PolicyConfig { approach_height: -0.1, ..Default::default() };
    assert!(cfg.validate().is_err());
    let mut cfg = PolicyConfig::default();
    cfg.registration.distance_threshold = 0.0;
    assert!(cfg.validate().is_err());
}
