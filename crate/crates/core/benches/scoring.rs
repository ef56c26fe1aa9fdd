use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gsal::baselines::{select_coreset, StrategyKind};
use gsal::exec::Execution;
use gsal::fusion::{score_round, AcquisitionConfig};
use gsal::pool::Sample;
use gsal::rarity::compute_thresholds;
use gsal::simulator::{generate_pool, run_experiment, ExperimentConfig, NoObserver, PoolSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn scoring_round(c: &mut Criterion) {
    let mut group = c.benchmark_group("score_round");
    group.sample_size(10);
    for (pool_size, proposals) in [(2_000, 8), (2_000, 32)] {
        let world = generate_pool(&PoolSpec {
            pool_size,
            proposals_per_image: [proposals, proposals],
            ..Default::default()
        })
        .unwrap();
        let provider = world.provider(4, Default::default());
        let samples: Vec<&Sample> = world.samples().iter().collect();
        let tau = compute_thresholds(world.graph(), 20.0).unwrap();
        for (name, execution) in MODES {
            let cfg = AcquisitionConfig {
                execution,
                ..Default::default()
            };
            group.bench_with_input(
                BenchmarkId::new(name, format!("{pool_size}x{proposals}")),
                &cfg,
                |b, cfg| b.iter(|| score_round(black_box(&samples), world.graph(), &tau, &provider, cfg).unwrap()),
            );
        }
    }
    group.finish();
}

fn coreset(c: &mut Criterion) {
    let world = generate_pool(&PoolSpec::default()).unwrap();
    let pool: Vec<&Sample> = world.samples()[200..].iter().collect();
    let labeled: Vec<&[f64]> = world.samples()[..200].iter().map(|s| s.embedding.as_slice()).collect();
    let mut group = c.benchmark_group("core_set");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_function(name, |b| b.iter(|| select_coreset(black_box(&pool), &labeled, 100, execution).unwrap()));
    }
    group.finish();
}

fn experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for (name, execution) in MODES {
        let mut cfg = ExperimentConfig {
            strategies: vec![StrategyKind::Gsal, StrategyKind::Entropy, StrategyKind::Random],
            budgets: vec![0.01, 0.05, 0.10],
            seeds: vec![0, 1],
            runs_execution: execution,
            ..Default::default()
        };
        cfg.acquisition.execution = execution;
        group.bench_function(name, |b| b.iter(|| run_experiment(black_box(&cfg), &NoObserver).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, scoring_round, coreset, experiment);
criterion_main!(benches);
