use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use convlab_core::model::{presets, Model};
use convlab_core::strategy::{full_information_policy, partial_information_policy, Variant};
use convlab_core::value::{mc_compare, McSettings, StartState};
use convlab_core::Execution;

fn settings(execution: Execution) -> McSettings {
    let mut s = McSettings::new(256, 7);
    s.dt = 1e-2;
    s.x0 = 0.5;
    s.execution = execution;
    s
}

fn full_information(c: &mut Criterion) {
    let model = Model::new(presets::fig2()).unwrap();
    let policies = [
        full_information_policy(&model, Variant::Unrestricted).unwrap(),
        full_information_policy(&model, Variant::BetaNeutral).unwrap(),
    ];
    let mut group = c.benchmark_group("mc_full_information");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| mc_compare(&model, &policies, &StartState::Regime(0), &settings(exec)).unwrap())
        });
    }
    group.finish();
}

fn partial_information(c: &mut Criterion) {
    let model = Model::new(presets::fig4()).unwrap();
    let policies = [partial_information_policy(&model, Variant::Unrestricted).unwrap()];
    let start = StartState::Belief(vec![0.5, 0.5]);
    let mut group = c.benchmark_group("mc_partial_information");
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| mc_compare(&model, &policies, &start, &settings(exec)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, full_information, partial_information);
criterion_main!(benches);
