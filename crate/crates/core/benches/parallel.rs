use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oog_core::geom::{pose, Rotation, Vec3};
use oog_core::oog::{build_plan, PlanBuildConfig};
use oog_core::par::Parallelism;
use oog_core::policy::PolicyConfig;
use oog_core::register::{ransac_register, RegistrationConfig};
use oog_core::sim::{evaluate, synthesize_demo, DemoOptions, EvalConfig, Shape, TaskKind};
use oog_core::tracks::{kernel_changepoint, ChangepointConfig};
use std::hint::black_box;

const MODES: [Parallelism; 2] = [Parallelism::Sequential, Parallelism::Parallel];

fn name(p: Parallelism) -> &'static str {
    match p {
        Parallelism::Sequential => "sequential",
        Parallelism::Parallel => "parallel",
    }
}

fn registration(c: &mut Criterion) {
    let src = Shape::Mug.model();
    let q = pose(Rotation::from_euler_angles(0.4, -0.9, 2.0), Vec3::new(0.1, -0.05, 0.02));
    let dst = src.transformed(&q);
    let mut g = c.benchmark_group("registration");
    g.sample_size(10);
    for p in MODES {
        let cfg = RegistrationConfig { seed: 1, parallelism: p, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name(p)), |b| {
            b.iter(|| ransac_register(black_box(src), black_box(&dst), &cfg).unwrap())
        });
    }
    g.finish();
}

fn changepoint(c: &mut Criterion) {
    let signal: Vec<f64> = (0..600).map(|i| ((i / 120) as f64) * 0.5 + 0.05 * (i as f64 * 0.37).sin()).collect();
    let mut g = c.benchmark_group("kernel_changepoint");
    g.sample_size(10);
    for p in MODES {
        let cfg = ChangepointConfig { parallelism: p, ..Default::default() };
        g.bench_function(BenchmarkId::from_parameter(name(p)), |b| {
            b.iter(|| kernel_changepoint(black_box(&signal), &cfg).unwrap())
        });
    }
    g.finish();
}

fn evaluation(c: &mut Criterion) {
    let demo = synthesize_demo(TaskKind::MugOnCoaster, &DemoOptions::default());
    let plan = build_plan(&demo.bundle, &PlanBuildConfig::default()).unwrap();
    let mut g = c.benchmark_group("evaluate");
    g.sample_size(10);
    for p in MODES {
        let eval = EvalConfig { trials: 8, seed: 3, parallelism: p };
        g.bench_function(BenchmarkId::from_parameter(name(p)), |b| {
            b.iter(|| evaluate(&plan, &demo.template, &demo.template.sim, &PolicyConfig::default(), &eval).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, registration, changepoint, evaluation);
criterion_main!(benches);
