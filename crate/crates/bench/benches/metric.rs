use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use std::hint::black_box;

use robust_merton::market::{DiscreteLevyMeasure, JumpAtom};
use robust_merton::metric::{kr_distance, MetricConfig};

fn measure(offset: f64, n: usize) -> DiscreteLevyMeasure {
    let atoms = (0..n)
        .map(|i| JumpAtom {
            location: DVector::from_vec(vec![offset + 0.1 * (i as f64 + 1.0)]),
            intensity: 0.2 + 0.05 * i as f64,
        })
        .collect();
    DiscreteLevyMeasure::new(1, atoms).unwrap()
}

fn bench_kr_distance(c: &mut Criterion) {
    let cfg = MetricConfig::new(1.0).unwrap();
    for n in [4usize, 8, 16] {
        let mu = measure(0.0, n);
        let nu = measure(0.03, n);
        c.bench_function(&format!("kr_distance {n} atoms"), |b| {
            b.iter(|| black_box(kr_distance(&mu, &nu, &cfg).unwrap()))
        });
    }
}

criterion_group!(benches, bench_kr_distance);
criterion_main!(benches);
