//! Modified Gram-Schmidt with column pivoting and explicit column updates.
//!
//! Every remaining column is updated after each step and its norm is
//! recomputed from the updated vector, so no norm downdating is involved.
//! This route shares no bookkeeping with the greedy driver, which makes the
//! two suitable as cross-checks of one another.

use alloc::vec::Vec;

use crate::greedy::{Candidate, GreedyError, Termination};
use crate::matrix::{Matrix, Permutation, SnapshotMatrix};
use crate::scalar::{self, C64, EPS};

#[derive(Debug, Clone)]
pub struct MgsQr {
    /// Orthonormal factor, N x k.
    pub q: Matrix,
    /// `k x M` upper-trapezoidal factor, columns in original order.
    pub r: Matrix,
    pub pivots: Vec<usize>,
    /// Columns after all updates: `S - Q_k Q_k^H S`, original order.
    pub residual: Matrix,
    /// Largest remaining column norm when the loop stopped: `R(k+1, k+1)`.
    pub final_diag: f64,
    pub termination: Termination,
}

impl MgsQr {
    pub fn k(&self) -> usize {
        self.pivots.len()
    }

    pub fn permutation(&self) -> Permutation {
        Permutation::from_prefix(&self.pivots, self.r.cols()).expect("pivots are distinct")
    }

    /// `R * Pi`, the upper-trapezoidal factor in pivoted column order.
    pub fn r_pivoted(&self) -> Matrix {
        self.permutation().apply_to_columns(&self.r)
    }

    /// Diagonal of `R`.
    pub fn r_diag(&self) -> Vec<f64> {
        self.pivots.iter().enumerate().map(|(j, &p)| self.r.get(j, p).re).collect()
    }

    /// Trailing block `R_22` at split `k`: rows `k..`, pivoted columns `k..`.
    pub fn trailing_block(&self, k: usize) -> Matrix {
        let rp = self.r_pivoted();
        rp.submatrix(k.min(rp.rows())..rp.rows(), k.min(rp.cols())..rp.cols())
    }
}

/// Runs MGS with pivoting until `R(k,k) <= tau` or `k_max` steps.
pub fn mgs_pivoted_qr(snapshots: &SnapshotMatrix, tau: f64, k_max: usize) -> Result<MgsQr, GreedyError> {
    let n = snapshots.n_rows();
    let m = snapshots.n_cols();
    if !(tau > 0.0) {
        return Err(GreedyError::ToleranceTooSmall(tau));
    }
    let limit = n.min(m);
    if k_max == 0 || k_max > limit {
        return Err(GreedyError::InvalidBasisLimit { k_max, limit });
    }

    let mut v = snapshots.matrix().clone();
    let mut selected = alloc::vec![false; m];
    let mut q = Matrix::zeros(n, 0);
    let mut rows: Vec<Vec<C64>> = Vec::new();
    let mut pivots = Vec::new();
    let termination;
    let final_diag;

    loop {
        let best = Candidate::reduce(
            (0..m).filter(|&i| !selected[i]).map(|i| Candidate { index: i, value: scalar::norm_sq(v.col(i)) }),
        );
        let diag = if best.index == usize::MAX { 0.0 } else { scalar::sqrt(best.value) };
        if diag <= tau {
            termination = Termination::ToleranceReached;
            final_diag = diag;
            break;
        }
        if pivots.len() >= k_max {
            termination = Termination::BasisLimit;
            final_diag = diag;
            break;
        }
        let input_norm = scalar::sqrt(snapshots.col_norms_sq()[best.index]);
        if diag <= 1e3 * EPS * input_norm {
            termination = Termination::RankExhausted;
            final_diag = diag;
            break;
        }

        let i = best.index;
        let mut qk = v.col(i).to_vec();
        scalar::scale(1.0 / diag, &mut qk);
        let mut row = alloc::vec![C64::default(); m];
        row[i] = scalar::c64(diag, 0.0);
        selected[i] = true;
        v.col_mut(i).fill(C64::default());
        for j in 0..m {
            if selected[j] {
                continue;
            }
            let c = scalar::dotc(&qk, v.col(j));
            row[j] = c;
            scalar::axpy(-c, &qk, v.col_mut(j));
        }
        q.push_column(&qk)?;
        rows.push(row);
        pivots.push(i);
    }

    let r = Matrix::from_fn(rows.len(), m, |j, i| rows[j][i]);
    Ok(MgsQr { q, r, pivots, residual: v, final_diag, termination })
}
