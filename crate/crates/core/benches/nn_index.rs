//! Index performance contract: mean query time must grow sub-linearly in
//! the index size from 10^3 to 10^5 entries.
//!
//! Run with `cargo bench -p coverstream`. The linear-scan series is included
//! for reference; it grows linearly by construction.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coverstream::index::{BallId, KdIndex, LinearIndex, NnIndex};

const DIM: usize = 8;

fn filled<I: NnIndex + Default>(n: usize, rng: &mut ChaCha8Rng) -> I {
    let mut index = I::default();
    for id in 0..n as u64 {
        let p: Vec<f64> = (0..DIM).map(|_| rng.gen_range(-100.0..100.0)).collect();
        index.insert(BallId(id), &p).unwrap();
    }
    index
}

fn queries(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..DIM).map(|_| rng.gen_range(-100.0..100.0)).collect())
        .collect()
}

fn bench_nearest(c: &mut Criterion) {
    let mut group = c.benchmark_group("nearest");
    for &size in &[1_000usize, 10_000, 100_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let kd: KdIndex = filled(size, &mut rng);
        let qs = queries(256, &mut rng);
        group.throughput(Throughput::Elements(qs.len() as u64));
        group.bench_with_input(BenchmarkId::new("kd", size), &qs, |b, qs| {
            b.iter(|| {
                let mut acc = 0.0;
                for q in qs {
                    acc += kd.nearest(q).unwrap().distance;
                }
                acc
            })
        });
        // linear reference only at the sizes where it stays affordable
        if size <= 10_000 {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let lin: LinearIndex = filled(size, &mut rng);
            group.bench_with_input(BenchmarkId::new("linear", size), &qs, |b, qs| {
                b.iter(|| {
                    let mut acc = 0.0;
                    for q in qs {
                        acc += lin.nearest(q).unwrap().distance;
                    }
                    acc
                })
            });
        }
    }
    group.finish();
}

fn bench_mutation(c: &mut Criterion) {
    let mut group = c.benchmark_group("relocate");
    for &size in &[1_000usize, 10_000] {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let kd: KdIndex = filled(size, &mut rng);
        group.bench_with_input(BenchmarkId::new("kd", size), &size, |b, &size| {
            let mut kd = kd.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            b.iter(|| {
                let id = BallId(rng.gen_range(0..size as u64));
                let p: Vec<f64> = (0..DIM).map(|_| rng.gen_range(-100.0..100.0)).collect();
                kd.relocate(id, &p).unwrap();
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_nearest, bench_mutation);
criterion_main!(benches);
