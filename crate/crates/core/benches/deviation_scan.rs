use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seleq_core::*;
use std::hint::black_box;
use std::sync::Arc;

fn lin(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn lattice(points: usize, side: usize) -> TestSet {
    let grid = Arc::new(TypeGrid::uniform(-1.0, 0.7, points).unwrap());
    TestSet::from_family(&Family::PowerLinear, grid, &lin(0.05, 0.6, side), &lin(0.3, 1.0, side)).unwrap()
}

fn run(c: &mut Criterion) {
    let market = Market::default();
    let mut group = c.benchmark_group("verify_symmetric");
    group.sample_size(10);

    for (points, side) in [(41, 10), (201, 20)] {
        let set = lattice(points, side);
        let cand = candidate_equilibrium(&set, signal::MIN_INFO_TOL).unwrap().unwrap().procedure;
        let label = format!("{points}x{}", side * side);

        let seq = SearchConfig { parallel: false, ..SearchConfig::default() };
        let par = SearchConfig { parallel: true, ..SearchConfig::default() };
        let expected = verify_symmetric(&cand, &set, &market, &seq).unwrap().best_gain;
        assert_eq!(expected, verify_symmetric(&cand, &set, &market, &par).unwrap().best_gain);

        group.bench_with_input(BenchmarkId::new("seq", &label), &set, |b, set| {
            b.iter(|| verify_symmetric(black_box(&cand), set, &market, &seq).unwrap().best_gain)
        });
        group.bench_with_input(BenchmarkId::new("rayon", &label), &set, |b, set| {
            b.iter(|| verify_symmetric(black_box(&cand), set, &market, &par).unwrap().best_gain)
        });
    }
    group.finish();
}

criterion_group!(benches, run);
criterion_main!(benches);
