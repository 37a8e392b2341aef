//! Replication-loop throughput: the rayon-backed study harness against the
//! same harness forced onto one worker. Outputs are bit-identical for any
//! worker count (each replication seeds its own generator from its index),
//! so the comparison is pure scheduling overhead versus speedup.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use simcheck::gof::{run_test, TestOptions};
use simcheck::sim::{generate, run_study, Scenario, ScenarioKind, StudyConfig, TestKind};

fn study_config(workers: usize) -> StudyConfig {
    let scenario = Scenario::new(ScenarioKind::H11, 0.5, 100).unwrap();
    let mut config = StudyConfig::new(vec![scenario], vec![TestKind::Acm], 24, 7_777);
    config.workers = workers;
    config
}

fn bench_study(c: &mut Criterion) {
    // The parallel and sequential paths must agree exactly before any
    // timing is meaningful.
    let parallel = run_study(&study_config(0)).unwrap();
    let sequential = run_study(&study_config(1)).unwrap();
    for (a, b) in parallel.rows.iter().zip(&sequential.rows) {
        assert_eq!(a.rejection_rate, b.rejection_rate, "worker count changed a result");
    }

    let mut group = c.benchmark_group("study_24_reps_n100");
    group.sample_size(10);
    for (label, workers) in [("all_cores", 0usize), ("sequential", 1usize)] {
        group.bench_with_input(BenchmarkId::from_parameter(label), &workers, |b, &w| {
            b.iter(|| run_study(black_box(&study_config(w))).unwrap());
        });
    }
    group.finish();
}

fn bench_single_test(c: &mut Criterion) {
    let scenario = Scenario::new(ScenarioKind::H13, 0.5, 200).unwrap();
    let data = generate(&scenario, 42).unwrap();
    let family = ScenarioKind::H13.null_family();
    let options = TestOptions::default();
    c.bench_function("single_test_n200", |b| {
        b.iter(|| run_test(black_box(&data), &family, &options).unwrap());
    });
}

criterion_group!(benches, bench_study, bench_single_test);
criterion_main!(benches);
