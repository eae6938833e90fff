//! Empirical interpolation: greedy node selection on an orthonormal basis.
//!
//! Node `j` is the row where basis vector `j` differs most from its
//! interpolant on the first `j` vectors and nodes.

use alloc::vec::Vec;

use crate::dense::{Lu, SingularMatrix};
use crate::matrix::{Matrix, MatrixError};
use crate::scalar::{self, C64, EPS};
use crate::svd::{self, SvdError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EimError {
    #[error("basis has no columns")]
    EmptyBasis,
    #[error("basis is not orthonormal: max |Q^H Q - I| = {0:e}")]
    NotOrthonormal(f64),
    #[error("interpolation residual vanished at basis vector {step}")]
    Degenerate { step: usize },
    #[error(transparent)]
    Singular(#[from] SingularMatrix),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Svd(#[from] SvdError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EimOperator {
    nodes: Vec<usize>,
    /// `B(a, b) = Q[nodes[a], b]`.
    node_matrix: Matrix,
    lu: Lu,
}

fn argmax_abs(v: &[C64]) -> (usize, f64) {
    v.iter()
        .enumerate()
        .map(|(i, z)| (i, scalar::abs(*z)))
        .fold((0, -1.0), |best, c| if c.1 > best.1 { c } else { best })
}

fn node_matrix(q: &Matrix, nodes: &[usize], k: usize) -> Matrix {
    Matrix::from_fn(nodes.len(), k, |a, b| q.get(nodes[a], b))
}

pub fn build_eim(q: &Matrix) -> Result<EimOperator, EimError> {
    let k = q.cols();
    if k == 0 || q.rows() == 0 {
        return Err(EimError::EmptyBasis);
    }
    let defect = q.orthonormality_defect();
    if !(defect <= 1e-12) {
        return Err(EimError::NotOrthonormal(defect));
    }
    let (first, peak) = argmax_abs(q.col(0));
    if !(peak > 0.0) {
        return Err(EimError::Degenerate { step: 0 });
    }
    let mut nodes = alloc::vec![first];
    for j in 1..k {
        let qj = q.col(j);
        let lu = Lu::factor(&node_matrix(q, &nodes, j))?;
        let rhs: Vec<C64> = nodes.iter().map(|&r| qj[r]).collect();
        let c = lu.solve(&rhs);
        let mut residual = qj.to_vec();
        for (b, cb) in c.iter().enumerate() {
            scalar::axpy(-*cb, q.col(b), &mut residual);
        }
        let (node, peak) = argmax_abs(&residual);
        if !(peak > 100.0 * EPS * scalar::max_abs(qj)) {
            return Err(EimError::Degenerate { step: j });
        }
        nodes.push(node);
    }
    let node_matrix = node_matrix(q, &nodes, k);
    let lu = Lu::factor(&node_matrix)?;
    Ok(EimOperator { nodes, node_matrix, lu })
}

impl EimOperator {
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn node_matrix(&self) -> &Matrix {
        &self.node_matrix
    }

    pub fn k(&self) -> usize {
        self.nodes.len()
    }

    /// Values of `v` at the nodes.
    pub fn samples(&self, v: &[C64]) -> Vec<C64> {
        self.nodes.iter().map(|&r| v[r]).collect()
    }

    /// Coefficients `c` with `B c = samples`.
    pub fn coefficients(&self, samples: &[C64]) -> Result<Vec<C64>, EimError> {
        if samples.len() != self.k() {
            return Err(EimError::LengthMismatch { expected: self.k(), found: samples.len() });
        }
        Ok(self.lu.solve(samples))
    }

    /// `Q c` where `B c = samples`.
    pub fn interpolate(&self, q: &Matrix, samples: &[C64]) -> Result<Vec<C64>, EimError> {
        if q.cols() != self.k() {
            return Err(EimError::LengthMismatch { expected: self.k(), found: q.cols() });
        }
        let c = self.coefficients(samples)?;
        let mut out = alloc::vec![C64::default(); q.rows()];
        for (b, cb) in c.iter().enumerate() {
            scalar::axpy(*cb, q.col(b), &mut out);
        }
        Ok(out)
    }

    /// `1 + ||B^{-1}||_2`, bounding the interpolation error by this factor
    /// times the best approximation error for an orthonormal basis.
    pub fn lebesgue_constant(&self) -> Result<f64, EimError> {
        Ok(1.0 + svd::spectral_norm(&self.lu.inverse())?)
    }

    /// `||B c - samples||_inf` for a solve against `samples`.
    pub fn solve_residual(&self, samples: &[C64]) -> Result<f64, EimError> {
        let c = self.coefficients(samples)?;
        let bc = self.node_matrix.mul(&Matrix::from_col_major(c.len(), 1, c)?);
        Ok(bc.col(0).iter().zip(samples).map(|(a, b)| scalar::abs(a - b)).fold(0.0, f64::max))
    }
}
