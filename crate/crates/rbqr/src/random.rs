//! Seeded random test matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rbqr_core::matrix::Matrix;
use rbqr_core::scalar::c64;

/// Entries with independent standard normal real and imaginary parts,
/// filled column by column.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Matrix::zeros(rows, cols);
    for z in m.as_mut_slice() {
        *z = c64(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    m
}
