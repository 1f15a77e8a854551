//! Parallel versus sequential execution of small UNGM and AEC studies.
//!
//! Run with `cargo bench -p epfes`; build with `--no-default-features` to
//! measure a binary without rayon, where both modes run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use epfes::experiments::{run_aec_study, run_ungm_study, AecConfigId, AecParamId, AecStudySpec, UngmStudySpec};
use epfes::par::Execution;

const MODES: [(Execution, &str); 2] = [(Execution::Parallel, "parallel"), (Execution::Sequential, "sequential")];

fn ungm(c: &mut Criterion) {
    let spec = UngmStudySpec {
        steps: 2_000,
        realizations: 4,
        ..UngmStudySpec::desk(42)
    };
    let mut group = c.benchmark_group("ungm_study");
    group.sample_size(10);
    for (exec, name) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_ungm_study(&spec, exec).unwrap())
        });
    }
    group.finish();
}

fn aec(c: &mut Criterion) {
    let mut spec = AecStudySpec {
        configs: vec![AecConfigId::C3],
        params: vec![AecParamId::P1, AecParamId::P3],
        seeds: 2,
        keep_traces: false,
        ..AecStudySpec::default()
    };
    spec.scenario.duration_s = 0.5;
    spec.run.schedule.freeze_s = 0.4;
    let mut group = c.benchmark_group("aec_study");
    group.sample_size(10);
    for (exec, name) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_aec_study(&spec, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ungm, aec);
criterion_main!(benches);
