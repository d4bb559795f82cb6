use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hitl_core::par::Execution;
use hitl_core::sim::SimConfig;
use hitl_service::bench::{run, BenchConfig, BenchDevice};

fn batch(c: &mut Criterion) {
    let devices = BenchDevice::parse_list("mouse,alexa,switch,semg").unwrap();
    let mut group = c.benchmark_group("bench_run");
    group.sample_size(10);
    for sessions in [2u32, 8] {
        for mode in [Execution::Sequential, Execution::Parallel] {
            let mut cfg = BenchConfig::new(devices.clone(), sessions, 1);
            cfg.sim = SimConfig::ideal();
            cfg.mode = mode;
            let name = if mode.is_parallel() { "parallel" } else { "sequential" };
            group.bench_with_input(BenchmarkId::new(name, sessions * 4), &cfg, |b, cfg| b.iter(|| run(cfg).unwrap()));
        }
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
