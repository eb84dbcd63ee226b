use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use propa::diagnostics::uniform_profile;
use propa::{compose, power, variation_profile};
use propa_bench::{ball_kernel, dyadic_mixture, path_space};
use std::hint::black_box;

fn bench_compose(c: &mut Criterion) {
    let mut group = c.benchmark_group("compose");
    for radius in [2u32, 8, 24] {
        let space = path_space(400);
        let k = ball_kernel(&space, radius);
        group.bench_with_input(BenchmarkId::from_parameter(radius), &k, |b, k| {
            b.iter(|| compose(black_box(k), black_box(k)).unwrap())
        });
    }
    group.finish();
}

fn bench_power(c: &mut Criterion) {
    let space = path_space(400);
    let mk = dyadic_mixture(&space);
    c.bench_function("power/mixture_n3", |b| {
        b.iter(|| power(black_box(&mk.kernel), 3).unwrap())
    });
    let core = space.core().to_vec();
    c.bench_function("power_rows/mixture_core_n8", |b| {
        b.iter(|| mk.kernel.power_rows(black_box(&core), 8).unwrap())
    });
}

fn bench_diagnostics(c: &mut Criterion) {
    let space = path_space(400);
    let mk = dyadic_mixture(&space);
    c.bench_function("uniform_profile/K24_n20", |b| {
        b.iter(|| uniform_profile(black_box(&mk.kernel), &space, 24, 20).unwrap())
    });
    let k = ball_kernel(&space, 24);
    c.bench_function("variation_profile/r24_K7", |b| {
        b.iter(|| variation_profile(black_box(&k), &space, 7).unwrap())
    });
}

criterion_group!(benches, bench_compose, bench_power, bench_diagnostics);
criterion_main!(benches);
