#![allow(dead_code)]

pub mod oracle;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rbqr_core::dense;
use rbqr_core::matrix::{Matrix, SnapshotMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex::new(re, im)
    })
}

/// `rows x p` matrix with orthonormal columns.
pub fn orthonormal(rows: usize, p: usize, rng: &mut ChaCha8Rng) -> Matrix {
    dense::householder_qr_thin(&gaussian(rows, p, rng)).0
}

/// `U diag(sigma) V^H` with random orthonormal factors.
pub fn with_spectrum(rows: usize, cols: usize, sigma: &[f64], rng: &mut ChaCha8Rng) -> Matrix {
    let u = orthonormal(rows, sigma.len(), rng);
    let v = orthonormal(cols, sigma.len(), rng);
    let mut us = u;
    us.scale_columns(sigma);
    us.mul(&v.adjoint())
}

/// Sum of `rank` random outer products.
pub fn low_rank(rows: usize, cols: usize, rank: usize, rng: &mut ChaCha8Rng) -> Matrix {
    gaussian(rows, rank, rng).mul(&gaussian(rank, cols, rng))
}

pub fn geometric(len: usize, first: f64, ratio: f64) -> Vec<f64> {
    (0..len).map(|i| first * ratio.powi(i as i32)).collect()
}

pub fn snaps(m: Matrix) -> SnapshotMatrix {
    SnapshotMatrix::new(m).unwrap()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}
