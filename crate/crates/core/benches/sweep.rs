use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use modal_ofb::design::scaling_sweep;
use modal_ofb::par::Execution;
use modal_ofb::spectral::Rectangle;

fn sweep(c: &mut Criterion) {
    let domain = Rectangle::unit_square();
    let mut group = c.benchmark_group("scaling_sweep");
    group.sample_size(10);
    for top in [20usize, 40] {
        let ns: Vec<usize> = (5..=top).collect();
        for (label, exec) in [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)] {
            group.bench_with_input(BenchmarkId::new(label, top), &ns, |b, ns| {
                b.iter(|| scaling_sweep(domain, ns, 0.6, None, exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
