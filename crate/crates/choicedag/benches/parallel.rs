//! Sequential vs. parallel instance sweeps on a small recovery workload.

use choicedag::experiments::{run_recovery_experiment, ExperimentSpec, Scenario};
use criterion::{criterion_group, criterion_main, Criterion};

fn spec(parallel: bool) -> ExperimentSpec {
    ExperimentSpec {
        scenario: Scenario::Recovery,
        n: 6,
        num_frequent: 4,
        num_rare: 8,
        kappa: 0.02,
        delta: 0.1,
        cv: 0.1,
        rhos: vec![0.0, 0.02],
        epsilons: vec![0.05],
        levels: vec![3],
        instances: 8,
        num_random_sets: 0,
        set_size: 3,
        m_cap: 2_000,
        seed: 7,
        parallel,
    }
}

fn bench_recovery_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("recovery_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| {
        let s = spec(false);
        b.iter(|| run_recovery_experiment(&s).unwrap())
    });
    group.bench_function("parallel", |b| {
        let s = spec(true);
        b.iter(|| run_recovery_experiment(&s).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_recovery_sweep);
criterion_main!(benches);
