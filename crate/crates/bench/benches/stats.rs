use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use leakscope::{p_two_tailed, simulate_counts, t_test};
use leakscope_bench::bench_profile;

fn bench_p_value(c: &mut Criterion) {
    let mut group = c.benchmark_group("p_two_tailed");
    for df in [4.0, 198.0, 2000.0, 1.0e5] {
        group.bench_with_input(BenchmarkId::from_parameter(df), &df, |b, &df| {
            b.iter(|| p_two_tailed(black_box(2.0064), black_box(df)))
        });
    }
    group.finish();
}

fn bench_t_test(c: &mut Criterion) {
    let profile = bench_profile(2, 0);
    let mut group = c.benchmark_group("t_test");
    for n in [100usize, 1_000, 10_000] {
        let a = simulate_counts(&profile, "c00", "cache-misses", n).unwrap();
        let b = simulate_counts(&profile, "c01", "cache-misses", n).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| t_test(black_box(&a), black_box(&b), 0.05).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_p_value, bench_t_test);
criterion_main!(benches);
