//! Iterated modified Gram-Schmidt (Hoffmann's MGSCI).
//!
//! A candidate vector is swept against the basis with modified Gram-Schmidt.
//! Another sweep follows while a sweep shrinks the residual norm by more than
//! a factor `1/kappa`. Coefficients from every sweep are summed, so
//! `v = Q * coeffs + residual_norm * q` holds to roundoff.

use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::scalar::{self, C64, EPS};

/// Orthogonality tolerance `max |(Q^H Q - I)_{ij}|` maintained by the greedy basis.
pub const ORTHO_TOL: f64 = 1e-13;

/// Hoffmann's acceptance parameter.
pub const DEFAULT_KAPPA: f64 = 2.0;

/// Hard cap on MGS sweeps per candidate.
pub const MAX_SWEEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum OrthoError {
    #[error("degenerate candidate: residual norm {residual:e} after {sweeps} sweeps (input norm {norm:e})")]
    Degenerate { residual: f64, norm: f64, sweeps: usize },
    #[error("candidate has length {found}, basis dimension is {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("kappa must exceed 1, got {0}")]
    InvalidKappa(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrthoResult {
    /// New unit basis vector.
    pub q: Vec<C64>,
    /// Accumulated projection coefficients against the existing basis.
    pub coeffs: Vec<C64>,
    /// Norm of the final residual, i.e. the new diagonal entry of R.
    pub residual_norm: f64,
    pub sweeps: usize,
    /// Number of length-N projections performed (one per basis vector per sweep).
    pub projections: u64,
}

/// Orthogonalizes `v` against the orthonormal columns of `basis`.
pub fn imgs_orthogonalize(basis: &Matrix, v: &[C64], kappa: f64) -> Result<OrthoResult, OrthoError> {
    if v.len() != basis.rows() {
        return Err(OrthoError::DimensionMismatch { expected: basis.rows(), found: v.len() });
    }
    if !(kappa > 1.0) {
        return Err(OrthoError::InvalidKappa(kappa));
    }
    let k = basis.cols();
    let input_norm = scalar::norm(v);
    let mut w = v.to_vec();
    let mut coeffs = alloc::vec![C64::default(); k];
    let mut projections = 0u64;
    let mut sweeps = 0;
    let mut prev = input_norm;
    let mut current = input_norm;

    if k == 0 {
        sweeps = 1;
    } else {
        while sweeps < MAX_SWEEPS {
            for (j, c) in coeffs.iter_mut().enumerate() {
                let qj = basis.col(j);
                let h = scalar::dotc(qj, &w);
                scalar::axpy(-h, qj, &mut w);
                *c += h;
            }
            projections += k as u64;
            sweeps += 1;
            current = scalar::norm(&w);
            if current > prev / kappa {
                break;
            }
            prev = current;
        }
    }

    if !(current > 1e3 * EPS * input_norm) || current == 0.0 {
        return Err(OrthoError::Degenerate { residual: current, norm: input_norm, sweeps });
    }
    scalar::scale(1.0 / current, &mut w);
    Ok(OrthoResult { q: w, coeffs, residual_norm: current, sweeps, projections })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::c64;
    use alloc::vec;

    fn e(n: usize, i: usize) -> Vec<C64> {
        let mut v = vec![C64::default(); n];
        v[i] = c64(1.0, 0.0);
        v
    }

    #[test]
    fn empty_basis_normalizes() {
        let basis = Matrix::zeros(3, 0);
        let r = imgs_orthogonalize(&basis, &[c64(2.0, 0.0), C64::default(), C64::default()], 2.0).unwrap();
        assert_eq!(r.q, e(3, 0));
        assert!(r.coeffs.is_empty());
        assert_eq!(r.sweeps, 1);
        assert_eq!(r.residual_norm, 2.0);
    }

    #[test]
    fn exact_projection_against_e1() {
        let basis = Matrix::from_columns(3, &[e(3, 0)]).unwrap();
        let v = [c64(1.0, 0.0), c64(1.0, 0.0), C64::default()];
        let r = imgs_orthogonalize(&basis, &v, 2.0).unwrap();
        for (a, b) in r.q.iter().zip(&e(3, 1)) {
            assert!(scalar::abs(a - b) < 1e-14);
        }
        assert!(scalar::abs(r.coeffs[0] - c64(1.0, 0.0)) < 1e-14);
    }

    #[test]
    fn vector_in_span_is_degenerate() {
        let basis = Matrix::from_columns(3, &[e(3, 0), e(3, 1)]).unwrap();
        let v = [c64(1.0, 2.0), c64(-3.0, 0.5), C64::default()];
        assert!(matches!(imgs_orthogonalize(&basis, &v, 2.0), Err(OrthoError::Degenerate { .. })));
        assert!(matches!(
            imgs_orthogonalize(&Matrix::zeros(3, 0), &[C64::default(); 3], 2.0),
            Err(OrthoError::Degenerate { .. })
        ));
    }

    #[test]
    fn rejects_bad_arguments() {
        let basis = Matrix::zeros(3, 0);
        assert_eq!(
            imgs_orthogonalize(&basis, &[C64::default(); 2], 2.0),
            Err(OrthoError::DimensionMismatch { expected: 3, found: 2 })
        );
        assert_eq!(imgs_orthogonalize(&basis, &e(3, 0), 1.0), Err(OrthoError::InvalidKappa(1.0)));
    }

    #[test]
    fn nearly_dependent_vector_triggers_reorthogonalization() {
        let basis = Matrix::from_columns(3, &[e(3, 0)]).unwrap();
        let v = [c64(1.0, 0.0), c64(1e-9, 0.0), C64::default()];
        let r = imgs_orthogonalize(&basis, &v, 2.0).unwrap();
        assert!(r.sweeps >= 2);
        assert!(scalar::abs(r.q[0]) < 1e-14);
        assert!((r.residual_norm - 1e-9).abs() < 1e-20);
    }
}
