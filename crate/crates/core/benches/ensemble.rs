use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use realtraj::harness::{map_trajectories_sequential, Engine, RunConfig};

const CONFIG: &str = r#"
[model]
preset = "driven_tla"
omega = 1.0

[detector]
kind = "apd"
efficiency = 0.8
dark_rate = 0.1
response_rate = 10.0
dead_time = 0.5

[run]
mode = "ensemble"
dt = 0.001
t_final = 2.0
trajectories = 32
"#;

fn ensemble(c: &mut Criterion) {
    let setup = RunConfig::from_toml(CONFIG).unwrap().validate(None).unwrap();
    let engine = Engine::new(&setup).unwrap();
    let count = setup.config.run.trajectories;
    let mut group = c.benchmark_group("apd_ensemble");
    group.sample_size(10);
    group.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, &n| {
        b.iter(|| map_trajectories_sequential(n, |i| engine.sampled_snapshots(i)).unwrap())
    });
    #[cfg(feature = "parallel")]
    group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, &n| {
        b.iter(|| realtraj::harness::map_trajectories_parallel(n, |i| engine.sampled_snapshots(i)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
