use crate::{Command, Common};
use anyhow::{anyhow, Context};
use oog_core::io::{read_file, validate_bundle_bytes, BundleError, RunConfig, CONFIG_FORMAT};
use oog_core::oog::{build_plan, deserialize_plan, format_relations, serialize_plan, to_dot, OogError, Plan};
use oog_core::policy::{run_policy, OutcomeClass, TraceRecord};
use oog_core::sim::{
    evaluate, randomize_layout, synthesize_demo, DemoOptions, EvalConfig, GoalSpec, SimEnvironment, SimScene, TaskKind,
    TaskTemplate,
};
use oog_core::tracks::CaptureMode;
use std::fmt::Write as _;
use std::path::Path;

/// Bundle, config or input file failed validation.
pub const EXIT_INVALID: u8 = 2;
/// The demonstration never changes a contact relation.
pub const EXIT_NO_CHANGE: u8 = 3;

/// An error with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub source: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, source: e.into() }
    }
}

fn invalid(e: impl Into<anyhow::Error>) -> Failure {
    Failure { code: EXIT_INVALID, source: e.into() }
}

/// Exit code of a simulated episode.
pub fn outcome_code(class: OutcomeClass) -> u8 {
    match class {
        OutcomeClass::Success => 0,
        OutcomeClass::MissedTracking => 10,
        OutcomeClass::MissedGrasp => 11,
        OutcomeClass::UnsatisfiedContact => 12,
    }
}

pub fn run(cmd: Command) -> Result<u8, Failure> {
    match cmd {
        Command::Validate { bundle } => validate(&bundle),
        Command::Plan { bundle, common, out } => plan(&bundle, &common, &out),
        Command::Simulate { plan, scene, goal, common, noise, out } => {
            simulate(&plan, &scene, &goal, &common, noise, &out)
        }
        Command::Eval { plan, template, common, trials, noise, out } => {
            eval(&plan, &template, &common, trials, noise, out.as_deref())
        }
        Command::Inspect { plan, out } => inspect(&plan, out.as_deref()),
        Command::Synth { task, common, noise, out } => synth(task, &common, noise, &out),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(invalid)
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn config(common: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &common.config {
        Some(p) => read_file::<RunConfig>(CONFIG_FORMAT, p)
            .with_context(|| format!("config {}", p.display()))
            .map_err(invalid)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(m) = common.mode {
        cfg.mode = Some(m.into());
    }
    if let Some(c) = common.convention {
        cfg.policy.convention = c.into();
    }
    if let Some(e) = common.epsilon_contact {
        cfg.epsilon_contact = Some(e);
    }
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

fn load_plan(path: &Path, cfg: &RunConfig) -> Result<Plan, Failure> {
    let mut plan =
        deserialize_plan(&read(path)?).with_context(|| format!("plan {}", path.display())).map_err(invalid)?;
    if let Some(e) = cfg.epsilon_contact {
        plan.epsilon_contact = e;
    }
    Ok(plan)
}

fn validate(path: &Path) -> Result<u8, Failure> {
    match validate_bundle_bytes(&read(path)?) {
        Ok(b) => {
            println!("ok: {} capture, {} frames, {} objects", b.mode.as_str(), b.frame_count, b.objects.len());
            Ok(0)
        }
        Err(BundleError::Invalid(violations)) => {
            for v in &violations {
                println!("{v}");
            }
            Err(invalid(anyhow!("{} violation(s) in {}", violations.len(), path.display())))
        }
        Err(e) => Err(invalid(e)),
    }
}

fn plan(bundle: &Path, common: &Common, out: &Path) -> Result<u8, Failure> {
    let cfg = config(common)?;
    let bundle = match validate_bundle_bytes(&read(bundle)?) {
        Ok(b) => b,
        Err(BundleError::Invalid(v)) => {
            for v in &v {
                eprintln!("{v}");
            }
            return Err(invalid(anyhow!("{} violation(s) in bundle", v.len())));
        }
        Err(e) => return Err(invalid(e)),
    };
    let plan = match build_plan(&bundle, &cfg.plan_config()) {
        Ok(p) => p,
        Err(OogError::NoRelationChange) => {
            return Err(Failure { code: EXIT_NO_CHANGE, source: OogError::NoRelationChange.into() })
        }
        Err(e @ OogError::Invalid(_)) => return Err(invalid(e)),
        Err(e) => return Err(e.into()),
    };
    write(out, &serialize_plan(&plan))?;
    let keyframes: Vec<String> = plan.keyframes().iter().map(|k| k.to_string()).collect();
    println!("keyframes: {}", keyframes.join(" "));
    let sets = plan.relation_sets();
    for (l, w) in sets.windows(2).enumerate() {
        println!("G{l} -> G{}: {} -> {}", l + 1, format_relations(&w[0]), format_relations(&w[1]));
    }
    Ok(0)
}

fn simulate(
    plan: &Path,
    scene: &Path,
    goal: &Path,
    common: &Common,
    noise: Option<f64>,
    out: &Path,
) -> Result<u8, Failure> {
    let cfg = config(common)?;
    let plan = load_plan(plan, &cfg)?;
    let scene = SimScene::from_json(&read(scene)?).context("scene").map_err(invalid)?;
    let goal = GoalSpec::from_json(&read(goal)?).context("goal").map_err(invalid)?;
    goal.validate(&scene).context("goal").map_err(invalid)?;
    let mut sim = cfg.sim.unwrap_or_default();
    if let Some(n) = noise {
        sim.noise = n;
    }
    sim.validate().map_err(invalid)?;
    let mut env = SimEnvironment::new(scene, goal, sim, plan.epsilon_contact, cfg.seed);
    let trace = run_policy(&plan, &mut env, &cfg.policy).map_err(invalid)?;
    write(out, &trace.to_json())?;
    let reason = trace.records.iter().rev().find_map(|r| match r {
        TraceRecord::Failure { reason } => Some(reason.as_str()),
        _ => None,
    });
    print!("outcome: {} after {} step(s)", trace.outcome.class.as_str(), trace.outcome.steps);
    match reason {
        Some(r) => println!(" ({r})"),
        None => println!(),
    }
    Ok(outcome_code(trace.outcome.class))
}

fn eval(
    plan: &Path,
    template: &Path,
    common: &Common,
    trials: usize,
    noise: Option<f64>,
    out: Option<&Path>,
) -> Result<u8, Failure> {
    let cfg = config(common)?;
    let plan = load_plan(plan, &cfg)?;
    let template = TaskTemplate::from_json(&read(template)?).context("template").map_err(invalid)?;
    let mut sim = cfg.sim.unwrap_or(template.sim);
    if let Some(n) = noise {
        sim.noise = n;
    }
    let eval = EvalConfig { trials, seed: cfg.seed, ..Default::default() };
    let report = evaluate(&plan, &template, &sim, &cfg.policy, &eval).map_err(invalid)?;
    if let Some(path) = out {
        write(path, &report.to_json())?;
    }
    for t in &report.trials {
        let line = format!("trial {:>4}  seed {:>20}  {}", t.trial, t.seed, t.outcome.class.as_str());
        match &t.failure {
            Some(f) => println!("{line}  {f}"),
            None => println!("{line}"),
        }
    }
    print!("{}", report.table());
    Ok(0)
}

/// Line-oriented `key=value` dump of a plan.
pub fn dump(plan: &Plan) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "plan mode={} epsilon_contact={} graphs={}",
        plan.mode.as_str(),
        plan.epsilon_contact,
        plan.oogs.len()
    );
    for (l, g) in plan.oogs.iter().enumerate() {
        let grip = if g.grasp.grip_closed { "closed" } else { "open" };
        let _ = writeln!(
            s,
            "graph index={l} keyframe={} grip={grip} grasp_points={} relations={}",
            g.keyframe,
            g.grasp.grasp_points.len(),
            format_relations(&g.relation_set())
        );
        for o in &g.objects {
            let _ = writeln!(
                s,
                "  object id={} type={} points={} point_nodes={}",
                o.id,
                o.object_type.as_str(),
                o.cloud.len(),
                g.points_of(&o.id).count()
            );
        }
        for e in &g.edges {
            let _ = writeln!(s, "  edge a={} b={} contact={}", e.a, e.b, e.contact);
        }
    }
    s
}

fn inspect(path: &Path, out: Option<&Path>) -> Result<u8, Failure> {
    let plan = load_plan(path, &RunConfig::default())?;
    print!("{}", dump(&plan));
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for (l, g) in plan.oogs.iter().enumerate() {
                write(&dir.join(format!("graph_{l}.dot")), to_dot(g).as_bytes())?;
            }
        }
        None => plan.oogs.iter().for_each(|g| print!("\n{}", to_dot(g))),
    }
    Ok(0)
}

fn synth(task: TaskKind, common: &Common, noise: f64, out: &Path) -> Result<u8, Failure> {
    let cfg = config(common)?;
    let opts = DemoOptions { mode: cfg.mode.unwrap_or(CaptureMode::Rgbd), noise, seed: cfg.seed };
    let demo = synthesize_demo(task, &opts);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let scene = randomize_layout(&demo.template, cfg.seed)?;
    write(&out.join("bundle.json"), &demo.bundle.to_json())?;
    write(&out.join("template.json"), &demo.template.to_json())?;
    write(&out.join("scene.json"), &scene.to_json())?;
    write(&out.join("goal.json"), &demo.template.goal.to_json())?;
    let keyframes: Vec<String> = demo.truth.keyframes.iter().map(|k| k.to_string()).collect();
    println!("{task}: {} frames, keyframes {}", demo.bundle.frame_count, keyframes.join(" "));
    Ok(0)
}
