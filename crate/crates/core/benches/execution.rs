use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use humpty_core::exec::Execution;
use humpty_core::oracle::{evolve_grid, OracleOptions, ScaledDesign};
use humpty_core::params::{ConstantsSet, ExperimentConfig};
use humpty_core::phase::radius_sweep;
use std::hint::black_box;

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ]
}

fn sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig::baseline(ConstantsSet::paper());
    let radii: Vec<f64> = (0..256)
        .map(|i| 0.5e-6 + 1.5e-6 * i as f64 / 255.0)
        .collect();
    let mut group = c.benchmark_group("radius_sweep");
    for (name, exec) in modes() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| radius_sweep(black_box(&cfg), &radii, exec))
        });
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let design = ScaledDesign::default();
    let cfg = design.config();
    let spec = design.grid(8.0, 50);
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    for (name, exec) in modes() {
        let opts = OracleOptions {
            exec,
            ..Default::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &opts, |b, opts| {
            b.iter(|| evolve_grid(black_box(&cfg), &spec, opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sweep, grid);
criterion_main!(benches);
