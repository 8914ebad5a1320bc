#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use seleq_core::{Test, TypeGrid};
use std::sync::Arc;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lin(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Sorted uniform draws in `[lo, hi]`.
pub fn increasing_curve(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn random_test(rng: &mut impl Rng, grid: &Arc<TypeGrid>, lo: f64, hi: f64) -> Test {
    let pi = increasing_curve(rng, grid.len(), lo, hi);
    Test::new(grid.clone(), pi).unwrap()
}

/// Grid with random positive weights on evenly spaced types.
pub fn random_grid(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Arc<TypeGrid> {
    let theta = lin(lo, hi, n);
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    Arc::new(TypeGrid::new(theta, w, seleq_core::GridKind::Continuous).unwrap())
}

/// Random prior on `n` points with full support.
pub fn full_prior(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|x| x / s).collect()
}

/// Random prior supported on two adjacent points.
pub fn two_point_prior(rng: &mut impl Rng, n: usize, at: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    let a = rng.gen_range(0.05..0.95);
    p[at] = a;
    p[at + 1] = 1.0 - a;
    p
}
