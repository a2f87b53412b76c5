use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wolfebfgs::analysis::{analyze, verify_run};
use wolfebfgs::{run, InitScheme, Method, Objective, Problem, SolverConfig};

fn solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("bfgs_cubic_k100");
    g.sample_size(10);
    for d in [100, 300, 600] {
        let p = Problem::make_cubic(d, 100.0, 1.0, 1.0).unwrap();
        for init in [InitScheme::LIdentity, InitScheme::MuIdentity] {
            let cfg = SolverConfig {
                init: init.clone(),
                ..Default::default()
            };
            g.bench_with_input(BenchmarkId::new(init.label(), d), &cfg, |b, cfg| {
                b.iter(|| run(black_box(&p), cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn gradient_descent(c: &mut Criterion) {
    let p = Problem::make_cubic(100, 100.0, 1.0, 1.0).unwrap();
    let cfg = SolverConfig {
        method: Method::Gd,
        max_iters: 200_000,
        ..Default::default()
    };
    c.bench_function("gd_cubic_d100_k100", |b| {
        b.iter(|| run(black_box(&p), &cfg).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    let p = Problem::make_cubic(600, 1000.0, 1.0, 1.0).unwrap();
    let x = p.default_start();
    c.bench_function("cubic_value_grad_d600", |b| {
        b.iter(|| p.value_and_gradient(black_box(&x)))
    });
}

fn verification(c: &mut Criterion) {
    let p = Problem::make_cubic(100, 1000.0, 1.0, 1.0).unwrap();
    let cfg = SolverConfig {
        snapshot_stride: 1,
        ..Default::default()
    };
    let trace = run(&p, &cfg).unwrap();
    let mut g = c.benchmark_group("verify_cubic_d100_k1000");
    g.sample_size(10);
    g.bench_function("analyze", |b| {
        b.iter(|| analyze(&trace, &p, "bench").unwrap())
    });
    let analysis = analyze(&trace, &p, "bench").unwrap();
    g.bench_function("verify_run", |b| {
        b.iter(|| verify_run(&trace, &p, &analysis).unwrap())
    });
    g.finish();
}

criterion_group!(benches, solve, gradient_descent, oracle, verification);
criterion_main!(benches);
