use alignflow::{Cloud, Interaction, Kernel, KernelFamily, SumBackend};
use alignflow_bench::{line_cloud, square_cloud};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn alignment_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("alignment");
    group.sample_size(10);
    let k1 = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 1).unwrap();
    for n in [1024, 4096] {
        let (x, w, v) = line_cloud(n);
        for backend in [SumBackend::Direct, SumBackend::Chebyshev] {
            let mut eng = Interaction::new(&k1, backend);
            group.bench_with_input(BenchmarkId::new(format!("1d/{backend:?}"), n), &n, |b, _| {
                b.iter(|| eng.alignment(Cloud::new(&x, &[]), &w, &v, true))
            });
        }
    }
    let k2 = Kernel::new(KernelFamily::power_tail(1.0, 1.0), 2).unwrap();
    let side = 48;
    let (x1, x2, w, v) = square_cloud(side);
    for backend in [SumBackend::Direct, SumBackend::Chebyshev] {
        let mut eng = Interaction::new(&k2, backend);
        group.bench_with_input(BenchmarkId::new(format!("2d/{backend:?}"), side * side), &side, |b, _| {
            b.iter(|| eng.alignment(Cloud::new(&x1, &x2), &w, &v, true))
        });
    }
    group.finish();
}

criterion_group!(benches, alignment_sums);
criterion_main!(benches);
