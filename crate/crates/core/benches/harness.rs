use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sslab::bench::{
    execute_loaded, load_datasets, plan_runs, DatasetConfig, DatasetSource, Execution, ExperimentConfig,
    TechniqueConfig,
};

fn config() -> ExperimentConfig {
    ExperimentConfig {
        master_seed: 1,
        n_runs: 4,
        splits: vec![0.1, 0.5],
        threads: None,
        timing: false,
        datasets: (0..2)
            .map(|i| DatasetConfig {
                name: format!("art{i}"),
                source: DatasetSource::Generated {
                    generate: "30_80_00_20".into(),
                    train_size: 800,
                    test_size: 400,
                    seed: i,
                },
                bias: None,
                fixed_split: false,
            })
            .collect(),
        techniques: ["cc", "assemble-1nn", "reweight"]
            .into_iter()
            .map(TechniqueConfig::named)
            .collect(),
    }
}

fn harness(c: &mut Criterion) {
    let cfg = config();
    let plan = plan_runs(&cfg).unwrap();
    let datasets = load_datasets(&cfg).unwrap();
    let mut group = c.benchmark_group("execute_plan");
    group.sample_size(10);
    for (name, exec) in [
        ("serial", Execution::Serial),
        ("parallel", Execution::Parallel { threads: None }),
    ] {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| execute_loaded(&plan, &datasets, false, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, harness);
criterion_main!(benches);
