use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dflsim_bench::wdbc_fixture;
use dflsim_core::engine::{self, DeploymentConfig, DeploymentKind};
use dflsim_core::models::{self, ModelSpec, ParamVector};
use std::hint::black_box;

fn local_training(c: &mut Criterion) {
    let f = wdbc_fixture("iid");
    let client = &f.partition[0];
    let p0 = ParamVector::zeros(client.train.n_features());
    let mut group = c.benchmark_group("train_local_10_epochs");
    for spec in [ModelSpec::svm(), ModelSpec::logistic()] {
        group.bench_function(spec.kind.to_string(), |b| {
            b.iter(|| models::train_local(&spec, &p0, client, 10, black_box(0)).unwrap())
        });
    }
    group.finish();
}

fn aggregation(c: &mut Criterion) {
    let params: Vec<ParamVector> = (0..5)
        .map(|k| ParamVector {
            weights: (0..30).map(|j| (k * 30 + j) as f64 * 1e-3).collect(),
            bias: k as f64,
        })
        .collect();
    let counts = [90, 120, 70, 150, 110];
    c.bench_function("fedavg_5x31", |b| {
        b.iter(|| engine::fedavg_aggregate(black_box(&params), &counts).unwrap())
    });
}

fn deployments(c: &mut Criterion) {
    let f = wdbc_fixture("level2");
    let mut group = c.benchmark_group("run_deployment_svm_500");
    group.sample_size(10);
    for kind in DeploymentKind::ALL {
        let config = DeploymentConfig::new(kind, 5, 500, ModelSpec::svm(), 0);
        group.bench_with_input(BenchmarkId::from_parameter(kind), &config, |b, config| {
            b.iter(|| engine::run_deployment(config, &f.partition, &f.test).unwrap())
        });
    }
    group.finish();
}

fn constants(c: &mut Criterion) {
    let f = wdbc_fixture("level2");
    let mut group = c.benchmark_group("estimate_constants");
    group.sample_size(10);
    for spec in [ModelSpec::svm(), ModelSpec::logistic()] {
        group.bench_function(spec.kind.to_string(), |b| {
            b.iter(|| models::estimate_constants(&spec, &f.partition).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, local_training, aggregation, deployments, constants);
criterion_main!(benches);
