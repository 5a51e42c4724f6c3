use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use robust_merton::market::{admissible_region, jump_support_union, RegionMargin};
use robust_merton::saddle::{local_saddle, SolverConfig, UtilityContext};
use robust_merton_bench::drift_hull;

fn bench_local_saddle(c: &mut Criterion) {
    let set = drift_hull();
    let support = jump_support_union(&set);
    let region = admissible_region(&support, RegionMargin::N(1_000_000), 1).unwrap();
    let cfg = SolverConfig::default();

    c.bench_function("local_saddle crra drift hull", |b| {
        let ctx = UtilityContext::Crra { p: -1.0, region: &region };
        b.iter(|| black_box(local_saddle(&set, &ctx, &cfg, 0).unwrap()))
    });
    c.bench_function("local_saddle cara drift hull", |b| {
        let ctx = UtilityContext::Cara { a: 1.0, q: 0.5 };
        b.iter(|| black_box(local_saddle(&set, &ctx, &cfg, 0).unwrap()))
    });
}

criterion_group!(benches, bench_local_saddle);
criterion_main!(benches);
