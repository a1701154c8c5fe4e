//! Checker benchmarks: raw enumeration, the merge-precondition pair
//! matrix, and full pipeline runs on the objects with interesting
//! verdicts.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use replicheck_bench::builtin;
use replicheck_core::check::Analysis;
use replicheck_core::model::enumerate_states;
use replicheck_core::{run_pipeline, CheckConfig, CheckStage, StageSelection};

fn enumeration(c: &mut Criterion) {
    let (spec, bounds) = builtin("auction_safe");
    c.bench_function("enumerate auction_safe", |b| {
        b.iter(|| {
            let space = enumerate_states(&spec.schema, &bounds).unwrap();
            black_box(space.states.len())
        })
    });
}

fn pair_matrix(c: &mut Criterion) {
    let (spec, bounds) = builtin("auction_safe");
    let config = CheckConfig::default();
    c.bench_function("valid states + pair matrix auction_safe", |b| {
        b.iter(|| {
            let analysis = Analysis::build(&spec, &bounds, &config).unwrap();
            black_box(analysis.valid_pair_count())
        })
    });
}

fn pipelines(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    for name in ["pair_counter", "auction_unsafe", "auction_safe"] {
        let (spec, bounds) = builtin(name);
        let config = CheckConfig::default();
        group.bench_function(name, |b| {
            b.iter(|| black_box(run_pipeline(&spec, &bounds, &config).unwrap().verdict))
        });
    }
    group.finish();
}

fn concurrent_stage(c: &mut Criterion) {
    let (spec, bounds) = builtin("auction_safe");
    let config = CheckConfig {
        stages: StageSelection::Only(CheckStage::ConcurrentSafety),
        ..CheckConfig::default()
    };
    let mut group = c.benchmark_group("stage");
    group.sample_size(10);
    group.bench_function("concurrent_safety auction_safe", |b| {
        b.iter(|| black_box(run_pipeline(&spec, &bounds, &config).unwrap().verdict))
    });
    group.finish();
}

criterion_group!(benches, enumeration, pair_matrix, pipelines, concurrent_stage);
criterion_main!(benches);
