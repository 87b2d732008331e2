use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ftqc_bench::{network, problem, values};
use ftqc_core::ftqc;
use ftqc_core::optimizers::{ftqc_dgd_step, OptimizerState};
use ftqc_core::{Algorithm, FtqcConfig, RunConfig};

fn protocol(c: &mut Criterion) {
    let graph = network(10).unwrap();
    let x = values(10, 16);
    let mut group = c.benchmark_group("ftqc_vector");
    for delta in [1e-1, 1e-2, 1e-4] {
        let cfg = FtqcConfig::for_graph(delta, &graph);
        group.bench_with_input(BenchmarkId::from_parameter(delta), &cfg, |b, cfg| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                ftqc::run_vector(black_box(x.view()), &graph, cfg, seed).unwrap()
            })
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let p = problem(10, 16).unwrap();
    let x = values(1, 16).row(0).to_owned();
    c.bench_function("local_gradient", |b| b.iter(|| p.local_gradient(3, 0, black_box(x.view()))));
}

fn outer_step(c: &mut Criterion) {
    let graph = network(10).unwrap();
    let p = problem(10, 16).unwrap();
    let cfg = RunConfig::new(1e-2, p.curvature_bounds().optimal_step());
    c.bench_function("ftqc_dgd_step", |b| {
        b.iter_batched(
            || OptimizerState::zeros(Algorithm::FtqcDgd, 10, 16),
            |mut state| ftqc_dgd_step(&mut state, &p, &graph, &cfg, 1).unwrap(),
            criterion::BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, protocol, gradient, outer_step);
criterion_main!(benches);
