//! Sequential versus thread-pool execution of the two path-level loops.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sln_gbm::estimators::{estimate_trace_moments, terminal_samples};
use sln_gbm::{Scheme, TrajectoryConfig, Workers};

fn worker_sets() -> Vec<(&'static str, Workers)> {
    let cores = std::thread::available_parallelism()
        .map(|c| c.get())
        .unwrap_or(1);
    vec![
        ("sequential", Workers::Sequential),
        ("threads", Workers::Threads(cores.max(2))),
    ]
}

fn moments(c: &mut Criterion) {
    let mut group = c.benchmark_group("trace_moments_n3_2000_paths");
    group.sample_size(10);
    let config = TrajectoryConfig::new(3, 0.5, 1e-2, Scheme::Exponential, 3, 1);
    for (name, workers) in worker_sets() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &workers, |b, &w| {
            b.iter(|| estimate_trace_moments(&config, 2_000, w).unwrap())
        });
    }
    group.finish();
}

fn terminal(c: &mut Criterion) {
    let mut group = c.benchmark_group("terminal_samples_n3_euler_2000_paths");
    group.sample_size(10);
    for (name, workers) in worker_sets() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &workers, |b, &w| {
            b.iter(|| terminal_samples(3, 0.5, 1e-2, Scheme::Euler, 2_000, 1, w).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, moments, terminal);
criterion_main!(benches);
