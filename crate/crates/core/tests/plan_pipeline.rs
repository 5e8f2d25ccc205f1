use oog_core::geom::{pose, PointCloud, Rotation, Vec3};
use oog_core::io::{validate_bundle, validate_bundle_bytes, BundleError};
use oog_core::oog::{
    build_oog, build_plan, contact, deserialize_plan, estimate_plane, serialize_plan, to_dot, KeyframeInput,
    ObjectInput, ObjectType, OogError, PlanBuildConfig, Relation, RelationSet,
};
use oog_core::sim::{synthesize_demo, DemoOptions, TaskKind};
use oog_core::tracks::CaptureMode;
use proptest::prelude::*;

fn corpus() -> impl Iterator<Item = (TaskKind, DemoOptions)> {
    TaskKind::ALL.into_iter().flat_map(|kind| {
        [
            DemoOptions::default(),
            DemoOptions { noise: 0.001, seed: 3, ..Default::default() },
            DemoOptions { mode: CaptureMode::Rgb, ..Default::default() },
        ]
        .into_iter()
        .map(move |o| (kind, o))
    })
}

#[test]
fn synthesized_bundles_validate_and_plan() {
    for (kind, opts) in corpus() {
        let demo = synthesize_demo(kind, &opts);
        assert_eq!(validate_bundle(&demo.bundle), Ok(()), "{kind} {opts:?}");
        let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
        plan.validate().unwrap();
        assert!(plan.oogs.len() >= 2);
        if opts.mode == CaptureMode::Rgb {
            assert_eq!(plan.oogs.len(), 2, "{kind}");
        }
    }
}

#[test]
fn clean_depth_demos_recover_ground_truth() {
    for kind in TaskKind::ALL {
        let demo = synthesize_demo(kind, &DemoOptions::default());
        let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
        // adjacent keyframes with equal relation sets collapse into one
        let mut truth: Vec<(usize, RelationSet)> = Vec::new();
        for (&k, r) in demo.truth.keyframes.iter().zip(&demo.truth.relations) {
            let set: RelationSet = r.iter().cloned().collect();
            if truth.last().map(|t| &t.1) != Some(&set) {
                truth.push((k, set));
            }
        }
        assert_eq!(plan.oogs.len(), truth.len(), "{kind}");
        for (got, (want, _)) in plan.keyframes().iter().zip(&truth) {
            assert!(got.abs_diff(*want) <= 2, "{kind}: keyframe {got} vs {want}");
        }
        let truth: Vec<RelationSet> = truth.into_iter().map(|t| t.1).collect();
        assert_eq!(plan.relation_sets(), truth, "{kind}");
    }
}

#[test]
fn mug_on_coaster_has_four_keyframes() {
    let demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default());
    assert_eq!(demo.truth.keyframes.len(), 4);
}

#[test]
fn plan_files_round_trip_byte_for_byte() {
    let demo = synthesize_demo(TaskKind::Rearrange, &DemoOptions::default());
    let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
    let bytes = serialize_plan(&plan);
    let back = deserialize_plan(&bytes).unwrap();
    assert_eq!(serialize_plan(&back), bytes);
    let again = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
    assert_eq!(serialize_plan(&again), bytes);
}

#[test]
fn dot_marks_contacts_solid() {
    let demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions { mode: CaptureMode::Rgb, ..Default::default() });
    let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
    let dots: Vec<String> = plan.oogs.iter().map(to_dot).collect();
    assert_eq!(dots.len(), 2);
    assert!(
        dots[1].contains("\"coaster\" -- \"mug\" [style=solid]")
            || dots[1].contains("\"mug\" -- \"coaster\" [style=solid]")
    );
    assert!(!dots[0].contains("style=solid"));
}

#[test]
fn wrong_track_length_is_located() {
    let mut demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default());
    demo.bundle.objects[1].tracks[2].positions.pop();
    let v = validate_bundle(&demo.bundle).unwrap_err();
    assert!(v.iter().any(|v| v.path == "objects[1].tracks[2]"), "{v:?}");
}

#[test]
fn bundle_without_manipulated_object_is_rejected() {
    let mut demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default());
    for o in &mut demo.bundle.objects {
        o.object_type = ObjectType::Other;
    }
    let v = validate_bundle(&demo.bundle).unwrap_err();
    assert!(v.iter().any(|v| v.message.contains("manipulate")));
    assert!(matches!(build_plan(&demo.bundle, &PlanBuildConfig::default()), Err(OogError::Invalid(_))));
}

#[test]
fn parse_errors_are_not_violations() {
    assert!(matches!(validate_bundle_bytes(b"{ not json"), Err(BundleError::Parse(_))));
    let demo = synthesize_demo(TaskKind::Pour, &DemoOptions::default());
    assert_eq!(validate_bundle_bytes(&demo.bundle.to_json()).unwrap(), demo.bundle);
}

#[test]
fn static_scene_has_no_relation_change() {
    let mut demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default());
    demo.bundle.hand.clear();
    for o in &mut demo.bundle.objects {
        o.snapshots.clear();
        for t in &mut o.tracks {
            let first = t.positions[0];
            t.positions.iter_mut().for_each(|p| *p = first);
        }
    }
    assert!(matches!(build_plan(&demo.bundle, &PlanBuildConfig::default()), Err(OogError::NoRelationChange)));
}

#[test]
fn plane_alignment_is_rigid() {
    let demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default());
    let plane = estimate_plane(&demo.bundle.plane, &Default::default()).unwrap();
    let objects: Vec<ObjectInput> = demo
        .bundle
        .objects
        .iter()
        .map(|o| ObjectInput {
            id: o.id.clone(),
            name: o.name.clone(),
            object_type: o.object_type,
            cloud: o.cloud.clone().unwrap(),
            model_vertices: None,
            pose: None,
        })
        .collect();
    let input = KeyframeInput { keyframe: 0, objects: objects.clone(), hand: None, points: Vec::new() };
    let g = build_oog(&input, &plane, 0.01).unwrap();
    let mut worst = 0.0f64;
    for (raw, aligned) in objects.iter().zip(&g.objects) {
        let (a, b) = (&raw.cloud.points, &aligned.cloud.points);
        for i in (0..a.len()).step_by(7) {
            for j in (0..a.len()).step_by(11) {
                worst = worst.max(((a[i] - a[j]).norm() - (b[i] - b[j]).norm()).abs());
            }
        }
    }
    assert!(worst < 1e-9, "distortion {worst}");
}

fn blob(centre: Vec3) -> PointCloud {
    PointCloud::new(
        (0..27).map(|i| centre + Vec3::new((i % 3) as f64, (i / 3 % 3) as f64, (i / 9) as f64) * 0.01).collect(),
    )
}

proptest! {
    #[test]
    fn contact_is_monotone_in_epsilon(gap in 0.0..0.05f64, eps in 0.001..0.05f64, extra in 0.0..0.05f64) {
        let a = blob(Vec3::zeros());
        let b = blob(Vec3::new(0.02 + gap, 0.0, 0.0));
        if contact(&a, &b, eps) {
            prop_assert!(contact(&a, &b, eps + extra));
        }
        prop_assert_eq!(contact(&a, &b, eps), contact(&b, &a, eps));
    }

    #[test]
    fn relations_ignore_argument_order(a in "[a-e]{1,3}", b in "[a-e]{1,3}") {
        prop_assert_eq!(Relation::objects(&a, &b), Relation::objects(&b, &a));
    }

    #[test]
    fn yawed_scene_keeps_its_relations(yaw in -3.1..3.1f64, dx in -0.3..0.3f64) {
        let demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions { mode: CaptureMode::Rgb, ..Default::default() });
        let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
        let q = pose(Rotation::from_axis_angle(&Vec3::z_axis(), yaw), Vec3::new(dx, 0.0, 0.0));
        for g in &plan.oogs {
            let moved: Vec<ObjectInput> = g.objects.iter().map(|o| ObjectInput {
                id: o.id.clone(),
                name: o.name.clone(),
                object_type: o.object_type,
                cloud: o.cloud.transformed(&q),
                model_vertices: None,
                pose: None,
            }).collect();
            let input = KeyframeInput { keyframe: g.keyframe, objects: moved, hand: None, points: Vec::new() };
            let z_up = oog_core::geom::Plane::new(Vec3::z(), 0.0).unwrap();
            let seen = build_oog(&input, &z_up, plan.epsilon_contact).unwrap();
            let objects_only: RelationSet = g.relation_set().into_iter().filter(|r| !r.involves_hand()).collect();
            prop_assert_eq!(seen.relation_set(), objects_only);
        }
    }
}
