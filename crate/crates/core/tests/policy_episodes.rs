use oog_core::geom::{kabsch_align, Vec3};
use oog_core::oog::{build_plan, Plan, PlanBuildConfig};
use oog_core::par::Parallelism;
use oog_core::policy::{
    optimize_se3_sequence, run_policy, OptimizerConfig, OptimizerMode, OutcomeClass, PolicyConfig, Trace, TraceRecord,
};
use oog_core::sim::{
    evaluate, randomize_layout, synthesize_demo, DemoOptions, EvalConfig, SimConfig, SimEnvironment, SimScene,
    SynthesizedDemo, TaskKind,
};
use oog_core::tracks::CaptureMode;

fn setup(kind: TaskKind, mode: CaptureMode) -> (SynthesizedDemo, Plan) {
    let demo = synthesize_demo(kind, &DemoOptions { mode, ..Default::default() });
    let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
    (demo, plan)
}

fn episode(demo: &SynthesizedDemo, plan: &Plan, scene: SimScene, cfg: &PolicyConfig, noise: f64) -> (Trace, SimScene) {
    let sim = SimConfig { noise, ..demo.template.sim };
    let mut env = SimEnvironment::new(scene, demo.template.goal.clone(), sim, plan.epsilon_contact, 11);
    let trace = run_policy(plan, &mut env, cfg).unwrap();
    (trace, env.scene)
}

#[test]
fn finished_scene_needs_no_actions() {
    let (demo, plan) = setup(TaskKind::MugOnCoaster, CaptureMode::Rgbd);
    let scene = randomize_layout(&demo.template, 3).unwrap();
    let (first, done) = episode(&demo, &plan, scene, &PolicyConfig::default(), 0.0);
    assert_eq!(first.outcome.class, OutcomeClass::Success);
    let (second, _) = episode(&demo, &plan, done, &PolicyConfig::default(), 0.0);
    assert_eq!(second.outcome.class, OutcomeClass::Success);
    assert_eq!(second.outcome.steps, 0);
    assert_eq!(second.actions().count(), 0);
}

#[test]
fn missing_object_is_missed_tracking() {
    let (demo, plan) = setup(TaskKind::MugOnCoaster, CaptureMode::Rgbd);
    let mut scene = randomize_layout(&demo.template, 3).unwrap();
    scene.objects.retain(|o| o.id != "coaster");
    let mut goal = demo.template.goal.clone();
    goal.relations.clear();
    goal.predicates.clear();
    let mut env = SimEnvironment::new(scene, goal, demo.template.sim, plan.epsilon_contact, 0);
    let trace = run_policy(&plan, &mut env, &PolicyConfig::default()).unwrap();
    assert_eq!(trace.outcome.class, OutcomeClass::MissedTracking);
    assert_eq!(trace.outcome.reward, 0);
}

#[test]
fn empty_budget_leaves_contacts_unsatisfied() {
    let (demo, plan) = setup(TaskKind::MugOnCoaster, CaptureMode::Rgbd);
    let scene = randomize_layout(&demo.template, 3).unwrap();
    let cfg = PolicyConfig { step_budget: 0, ..Default::default() };
    let (trace, _) = episode(&demo, &plan, scene, &cfg, 0.0);
    assert_eq!(trace.outcome.class, OutcomeClass::UnsatisfiedContact);
    assert_eq!(trace.actions().count(), 0);
}

#[test]
fn moved_reference_is_followed() {
    let (demo, plan) = setup(TaskKind::MugOnCoaster, CaptureMode::Rgbd);
    let mut scene = demo.template.scene.clone();
    let coaster = scene.objects.iter_mut().find(|o| o.id == "coaster").unwrap();
    coaster.pose.translation.vector += Vec3::new(0.0, 0.2, 0.0);
    let (trace, end) = episode(&demo, &plan, scene, &PolicyConfig::default(), 0.0);
    assert_eq!(trace.outcome.class, OutcomeClass::Success, "{:?}", trace.records.last());
    let mug = end.object("mug").unwrap().pose.translation.vector;
    let target = end.object("coaster").unwrap().pose.translation.vector;
    assert!((mug.xy() - target.xy()).norm() < 0.03);
}

#[test]
fn episodes_replay_identically_with_unit_rotations() {
    let (demo, plan) = setup(TaskKind::Rearrange, CaptureMode::Rgbd);
    let scene = randomize_layout(&demo.template, 8).unwrap();
    let (a, _) = episode(&demo, &plan, scene.clone(), &PolicyConfig::default(), 0.005);
    let (b, _) = episode(&demo, &plan, scene, &PolicyConfig::default(), 0.005);
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.actions().all(|s| (s.end_effector.rotation.quaternion().norm() - 1.0).abs() < 1e-12));
    assert!(a.records.iter().any(|r| matches!(r, TraceRecord::Registration { .. })));
}

#[test]
fn oracle_steps_are_kabsch_fits() {
    let traj: Vec<Vec<Vec3>> = (0..5)
        .map(|k| {
            (0..6)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    Vec3::new(k as f64 * 0.02 + t, (k * k) as f64 * 0.01, 0.03 * (k as f64 + t).sin())
                })
                .collect()
        })
        .collect();
    let steps =
        optimize_se3_sequence(&traj, &OptimizerConfig { mode: OptimizerMode::Oracle, ..Default::default() }).unwrap();
    for (i, s) in steps.iter().enumerate() {
        let a: Vec<Vec3> = traj.iter().map(|t| t[i]).collect();
        let b: Vec<Vec3> = traj.iter().map(|t| t[i + 1]).collect();
        assert_eq!(*s, kabsch_align(&a, &b).unwrap().pose);
    }
}

#[test]
fn rgb_pour_succeeds() {
    let (demo, plan) = setup(TaskKind::Pour, CaptureMode::Rgb);
    let eval = EvalConfig { trials: 8, seed: 2, ..Default::default() };
    let report = evaluate(&plan, &demo.template, &demo.template.sim, &PolicyConfig::default(), &eval).unwrap();
    assert_eq!(report.success_rate, 1.0, "{}", report.table());
}

#[test]
fn batch_results_ignore_scheduling() {
    let (demo, plan) = setup(TaskKind::MugTransfer, CaptureMode::Rgbd);
    let sim = SimConfig { noise: 0.005, ..demo.template.sim };
    let run = |parallelism| {
        let eval = EvalConfig { trials: 6, seed: 4, parallelism };
        evaluate(&plan, &demo.template, &sim, &PolicyConfig::default(), &eval).unwrap().to_json()
    };
    assert_eq!(run(Parallelism::Sequential), run(Parallelism::Parallel));
}

#[test]
fn zero_trials_give_an_empty_report() {
    let (demo, plan) = setup(TaskKind::MugOnCoaster, CaptureMode::Rgbd);
    let eval = EvalConfig { trials: 0, ..Default::default() };
    let report = evaluate(&plan, &demo.template, &demo.template.sim, &PolicyConfig::default(), &eval).unwrap();
    assert!(report.trials.is_empty() && report.counts.is_empty());
    assert_eq!(report.success_rate, 0.0);
}
