//! Rayon pool versus a single worker on the main Monte Carlo kernels.
//!
//! Results are identical in both configurations; only wall time differs.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;

use mlplug::experiments::{run_rate_sweep, ExperimentConfig};
use mlplug::{
    excess_risk, population_fn_risk, Distribution, DistributionSpec, EstimatorSpec, MonteCarloSpec,
    PlugIn, RuleSpec,
};

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut sizes = vec![1];
    if all > 1 {
        sizes.push(all);
    }
    sizes
        .into_iter()
        .map(|n| {
            let pool = ThreadPoolBuilder::new().num_threads(n).build().unwrap();
            (format!("{n}-threads"), pool)
        })
        .collect()
}

fn risk(c: &mut Criterion) {
    let dist = Distribution::new(DistributionSpec::TopkPolyMargin {
        alpha: 1.0,
        labels: 8,
        k: 3,
    })
    .unwrap();
    let mc = MonteCarloSpec::new(200_000, 1);
    let rule = RuleSpec::TopK { k: 3 };
    let plug_in = PlugIn {
        rule,
        estimator: EstimatorSpec::gaussian(1.0, 0.5),
        n: 1024,
    };
    let mut group = c.benchmark_group("risk");
    for (name, pool) in pools() {
        group.bench_with_input(
            BenchmarkId::new("population_fn_risk", &name),
            &pool,
            |b, pool| {
                b.iter(|| {
                    pool.install(|| population_fn_risk(&plug_in, black_box(&dist), &mc).unwrap())
                })
            },
        );
        group.bench_with_input(BenchmarkId::new("excess_risk", &name), &pool, |b, pool| {
            b.iter(|| pool.install(|| excess_risk(&plug_in, &rule, black_box(&dist), &mc).unwrap()))
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let cfg = ExperimentConfig {
        dist: DistributionSpec::TwoLabelLinear,
        estimator: EstimatorSpec::gaussian(1.0, 0.5),
        rule: RuleSpec::TopK { k: 1 },
        n_grid: vec![64, 256, 1024],
        replicates: 8,
        samples: 20_000,
        master_seed: 3,
    };
    let mut group = c.benchmark_group("rate_sweep");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(BenchmarkId::from_parameter(&name), &pool, |b, pool| {
            b.iter(|| pool.install(|| run_rate_sweep(black_box(&cfg)).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, risk, sweep);
criterion_main!(benches);
