use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use ptc_core::bench::{run_experiment, ExperimentConfig, Method};
use ptc_core::par::Execution;
use ptc_core::problems::ProblemKind;

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        ProblemKind::ShortestPath,
        vec![Method::PtcB, Method::PtcE, Method::Ellipsoid],
        vec![0.8],
        300,
    );
    cfg.d = 5;
    cfg.trials = 4;
    cfg.test_points = Some(40);
    cfg.var_samples = 200;
    cfg
}

fn execution_modes(c: &mut Criterion) {
    let cfg = small_config();
    let mut group = c.benchmark_group("run_experiment");
    group.sample_size(10);
    for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(name, |b| b.iter(|| run_experiment(black_box(&cfg), exec).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, execution_modes);
criterion_main!(benches);
