//! Parallel chunked engine vs sequential fallback vs dense per-shot sampler.

#[path = "../tests/common/dense.rs"]
mod dense;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pframe::noise::{scem_attach, ScemParams};
use pframe::{execute, execute_sequential, ExecOptions};
use std::hint::black_box;

fn bench(c: &mut Criterion) {
    let (_, circ, nq) = dense::fixed_circuits().remove(1);
    let mut g = c.benchmark_group("weight4-check");
    g.sample_size(10);
    for p in [1e-4, 1e-2] {
        let noisy = scem_attach(&circ, ScemParams { p }).unwrap();
        let tree = dense::report_tree(&noisy, nq as u32);
        let shots = 200_000u64;
        g.bench_with_input(BenchmarkId::new("parallel", p), &p, |b, _| {
            b.iter(|| execute(black_box(&tree), shots, &ExecOptions::seeded(1)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("sequential", p), &p, |b, _| {
            b.iter(|| execute_sequential(black_box(&tree), shots, &ExecOptions::seeded(1)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("dense", p), &p, |b, _| {
            b.iter(|| dense::dense_histogram(black_box(&noisy), nq, shots, 1))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
