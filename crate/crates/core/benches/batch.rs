use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use excursion_core::estimators::{run_probes, Probes, Sampler};
use excursion_core::{Execution, IncrementModel, SimConfig};

fn batch(c: &mut Criterion) {
    let models = [
        ("pareto3", IncrementModel::pareto(3.0, 1.0).unwrap()),
        ("weibull0.3", IncrementModel::weibull(0.3, 1.0).unwrap()),
    ];
    let n = 50_000;
    let probes = Probes {
        area: vec![10.0, 100.0],
        tau: vec![10.0],
        max: vec![5.0],
        ..Probes::default()
    };
    let mut group = c.benchmark_group("excursion_batch");
    group.throughput(Throughput::Elements(n));
    group.sample_size(10);
    for (name, model) in &models {
        for execution in [Execution::Sequential, Execution::Parallel] {
            let config = SimConfig::new(1).with_execution(execution);
            group.bench_with_input(BenchmarkId::new(format!("{execution:?}"), name), model, |b, m| {
                b.iter(|| run_probes(m, &config, n, &probes, &Sampler::Naive).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
