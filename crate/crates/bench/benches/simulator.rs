//! Simulator benchmarks: the scripted walkthrough scenario and seeded
//! lossy random walks.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use replicheck_bench::builtin;
use replicheck_core::sim::{find_scenario, run_random, run_scenario, Policy, RandomConfig};

fn walkthrough(c: &mut Criterion) {
    let scenario = (find_scenario("fig1_auction").unwrap().build)();
    let (spec, bounds) = scenario.resolve().unwrap();
    c.bench_function("fig1_auction scenario", |b| {
        b.iter(|| black_box(run_scenario(&spec, &bounds, &scenario).unwrap().violations))
    });
}

fn random_walks(c: &mut Criterion) {
    let mut group = c.benchmark_group("random walk 200 steps");
    for name in ["gset", "auction_safe"] {
        let (spec, bounds) = builtin(name);
        let cfg = RandomConfig::default();
        group.bench_function(name, |b| {
            b.iter(|| {
                let report = run_random(&spec, &bounds, Policy::SkipAndRecord, &cfg).unwrap();
                black_box(report.converged)
            })
        });
    }
    group.finish();
}

criterion_group!(benches, walkthrough, random_walks);
criterion_main!(benches);
