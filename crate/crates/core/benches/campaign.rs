use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use cpd_condition::exec::default_workers;
use cpd_condition::homotopy::TrackerConfig;
use cpd_condition::sampler::run_fixed;
use cpd_condition::tensor::Shape;

fn campaigns(c: &mut Criterion) {
    let tracker = TrackerConfig::default();
    let parallel = default_workers().max(2);
    let mut group = c.benchmark_group("run_fixed");
    group.sample_size(10);
    for (dims, r, count) in [(vec![2, 2, 2], 2, 256u64), (vec![3, 3, 2], 3, 64)] {
        let shape = Shape::new(dims).unwrap();
        for workers in [1, parallel] {
            let label = if workers == 1 {
                "sequential".to_string()
            } else {
                format!("parallel-{workers}")
            };
            group.bench_with_input(
                BenchmarkId::new(label, format!("{shape}-n{count}")),
                &workers,
                |b, &w| b.iter(|| run_fixed(&shape, r, count, 0, &tracker, w).unwrap()),
            );
        }
    }
    group.finish();
}

criterion_group!(benches, campaigns);
criterion_main!(benches);
