//! Singular value decomposition and the SVD-based reduction paths: POD,
//! optimal rank-revealing QR, and the QR-then-SVD reconstruction.
//!
//! The SVD is one-sided Jacobi. Tall inputs are first reduced by a thin
//! Householder QR so the sweeps run on a square factor.

use alloc::vec::Vec;

use crate::dense;
use crate::exec::{NoClock, Serial};
use crate::greedy::{self, GreedyError, GreedyOptions};
use crate::matrix::{Matrix, MatrixError, SnapshotMatrix};
use crate::ortho;
use crate::scalar::{self, c64, C64, EPS};

/// Sweep cap for the Jacobi iteration.
pub const MAX_JACOBI_SWEEPS: usize = 60;

/// Relative cutoff for numerical rank: `sigma_j > RANK_FACTOR * eps * sigma_1`.
pub const RANK_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SvdError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("Jacobi SVD did not converge in {sweeps} sweeps (largest scaled off-diagonal {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("requested rank {k} exceeds numerical rank {rank}")]
    RankTooLow { k: usize, rank: usize },
    #[error(transparent)]
    Greedy(#[from] GreedyError),
}

/// Thin SVD `A = V diag(sigma) W^H` with `p = min(rows, cols)` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub v: Matrix,
    pub sigma: Vec<f64>,
    pub w: Matrix,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix {
        let mut vs = self.v.clone();
        vs.scale_columns(&self.sigma);
        vs.mul(&self.w.adjoint())
    }
}

pub fn svd(a: &Matrix) -> Result<SvdResult, SvdError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(MatrixError::Empty { rows: a.rows(), cols: a.cols() }.into());
    }
    if let Some(idx) = a.as_slice().iter().position(|z| !scalar::is_finite(*z)) {
        return Err(MatrixError::NonFinite { row: idx % a.rows(), col: idx / a.rows() }.into());
    }
    if a.rows() >= a.cols() {
        tall_svd(a)
    } else {
        let t = tall_svd(&a.adjoint())?;
        Ok(SvdResult { v: t.w, sigma: t.sigma, w: t.v })
    }
}

fn tall_svd(a: &Matrix) -> Result<SvdResult, SvdError> {
    let (m, n) = (a.rows(), a.cols());
    let (q, mut r) = if m > n {
        let (q, r) = dense::householder_qr_thin(a);
        (Some(q), r)
    } else {
        (None, a.clone())
    };
    let mut w = Matrix::identity(n);
    jacobi(&mut r, &mut w)?;

    let norms: Vec<f64> = r.columns().map(scalar::norm).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let sigma: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let w = w.select_columns(&order);

    let floor = sigma[0] * EPS;
    let mut u = Matrix::zeros(n, 0);
    for (rank, &i) in order.iter().enumerate() {
        let mut col = r.col(i).to_vec();
        if sigma[rank] > floor {
            scalar::scale(1.0 / sigma[rank], &mut col);
        } else {
            col = complete(&u, &col);
        }
        u.push_column(&col)?;
    }
    let v = match q {
        Some(q) => q.mul(&u),
        None => u,
    };
    Ok(SvdResult { v, sigma, w })
}

/// Unit vector orthogonal to the columns of `u`, preferring the direction of `hint`.
fn complete(u: &Matrix, hint: &[C64]) -> Vec<C64> {
    let n = u.rows();
    let unit = |i: usize| {
        let mut e = alloc::vec![C64::default(); n];
        e[i] = c64(1.0, 0.0);
        e
    };
    let candidates = core::iter::once(hint.to_vec()).chain((0..n).map(unit));
    for cand in candidates {
        if scalar::norm(&cand) == 0.0 {
            continue;
        }
        if let Ok(res) = ortho::imgs_orthogonalize(u, &cand, ortho::DEFAULT_KAPPA) {
            if res.residual_norm > 1e-6 * scalar::norm(&cand) {
                return res.q;
            }
        }
    }
    unreachable!("fewer than n columns always admit a completion")
}

/// One-sided cyclic Jacobi on the columns of a square or tall `a`,
/// accumulating the right rotations into `w`.
fn jacobi(a: &mut Matrix, w: &mut Matrix) -> Result<(), SvdError> {
    let (m, n) = (a.rows(), a.cols());
    let tol = 4.0 * EPS * scalar::sqrt(m as f64);
    let mut norms: Vec<f64> = a.columns().map(scalar::norm_sq).collect();
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = scalar::dotc(a.col(p), a.col(q));
                let g = scalar::abs(gamma);
                let scaled = g / scalar::sqrt(alpha * beta);
                off = off.max(scaled);
                if scaled <= tol {
                    continue;
                }
                // Rotate so the phase of gamma is absorbed into column q.
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + scalar::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / scalar::sqrt(1.0 + t * t);
                let s = c * t;
                rotate(a, p, q, c, s, phase);
                rotate(w, p, q, c, s, phase);
                norms[p] = scalar::norm_sq(a.col(p));
                norms[q] = scalar::norm_sq(a.col(q));
            }
        }
        if off <= tol {
            return Ok(());
        }
    }
    let off = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
        .map(|(p, q)| {
            let d = scalar::sqrt(norms[p] * norms[q]);
            if d == 0.0 { 0.0 } else { scalar::abs(scalar::dotc(a.col(p), a.col(q))) / d }
        })
        .fold(0.0, f64::max);
    Err(SvdError::NoConvergence { sweeps: MAX_JACOBI_SWEEPS, off })
}

fn rotate(a: &mut Matrix, p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let rows = a.rows();
    for i in 0..rows {
        let x = a.get(i, p);
        let y = phase * a.get(i, q);
        a.set(i, p, x * c - y * s);
        a.set(i, q, x * s + y * c);
    }
}

pub fn singular_values(a: &Matrix) -> Result<Vec<f64>, SvdError> {
    Ok(svd(a)?.sigma)
}

/// `||A||_2`; zero for a matrix with no rows or columns.
pub fn spectral_norm(a: &Matrix) -> Result<f64, SvdError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    Ok(singular_values(a)?[0])
}

/// Number of singular values above `RANK_FACTOR * eps * sigma_1`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let Some(&s1) = sigma.first() else { return 0 };
    if s1 == 0.0 {
        return 0;
    }
    sigma.iter().take_while(|&&s| s > RANK_FACTOR * EPS * s1).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    /// First `k` left singular vectors.
    pub basis: Matrix,
    pub sigma: Vec<f64>,
    pub k: usize,
    /// Every singular value is at least tau, so the full basis was returned.
    pub full_rank: bool,
}

/// Keeps left singular vectors until the next singular value drops below `tau`.
pub fn pod_basis(snapshots: &SnapshotMatrix, tau: f64) -> Result<PodBasis, SvdError> {
    if !(tau > 0.0) {
        return Err(SvdError::InvalidTolerance(tau));
    }
    let s = svd(snapshots.matrix())?;
    let cut = s.sigma.iter().position(|&x| x < tau);
    let k = cut.unwrap_or(s.sigma.len());
    Ok(PodBasis { basis: s.v.leading_columns(k), sigma: s.sigma, k, full_rank: cut.is_none() })
}

/// QR basis whose projection error in the 2-norm equals `sigma_{k+1}`.
///
/// Factors `Sigma_k W_k^H = Qc Rc` and returns `V_k Qc`.
pub fn optimal_rrqr(snapshots: &SnapshotMatrix, k: usize) -> Result<Matrix, SvdError> {
    let s = svd(snapshots.matrix())?;
    let rank = numerical_rank(&s.sigma);
    if k == 0 || k > rank {
        return Err(SvdError::RankTooLow { k, rank });
    }
    let mut sw = s.w.leading_columns(k).adjoint();
    for i in 0..k {
        for j in 0..sw.cols() {
            let z = sw.get(i, j) * s.sigma[i];
            sw.set(i, j, z);
        }
    }
    let (qc, _) = dense::householder_qr(&sw);
    Ok(s.v.leading_columns(k).mul(&qc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    /// Returned basis `Q_j V(:, 1:k)`, N x k.
    pub basis: Matrix,
    /// Number of MGS steps taken.
    pub j: usize,
    pub k: usize,
    /// Singular values of the `j x M` block `R(1:j, :)`.
    pub sigma: Vec<f64>,
    /// `||R_22||_2`, the 2-norm of the MGS residual after `j` steps.
    pub r22_norm: f64,
    /// A `k` with `sigma_{k+1} < tau2 < sigma_k` existed; otherwise `k = j`.
    pub bracket_found: bool,
    /// `tau2 > tau1` was supplied.
    pub tau_order_warning: bool,
}

impl Reconstruction {
    /// `sigma_{k+1}` of `R(1:j, :)` (zero past the end) plus `||R_22||_2`.
    pub fn upper_bound(&self) -> f64 {
        self.sigma.get(self.k).copied().unwrap_or(0.0) + self.r22_norm
    }
}

/// Partial pivoted QR down to `tau1`, then an SVD of the `j x M` factor
/// `R(1:j, :)` truncated at `tau2`.
///
/// The pivoted QR is the greedy with iterated Gram-Schmidt, which selects
/// the same pivots as plain MGS with pivoting but keeps `Q_j` orthonormal on
/// graded input.
pub fn reconstruct_basis(snapshots: &SnapshotMatrix, tau1: f64, tau2: f64) -> Result<Reconstruction, SvdError> {
    for t in [tau1, tau2] {
        if !(t > 0.0) {
            return Err(SvdError::InvalidTolerance(t));
        }
    }
    let limit = snapshots.n_rows().min(snapshots.n_cols());
    let opts = GreedyOptions::new(tau1, limit);
    let (state, _) = greedy::greedy_build(snapshots.clone(), &opts, &Serial::default(), &NoClock)?;
    let j = state.k();
    let r1 = state.r_matrix();
    let (snapshots, q) = state.into_parts();
    let residual = snapshots.matrix().sub(&q.mul(&r1));
    let r22_norm = spectral_norm(&residual)?;
    let tau_order_warning = tau2 > tau1;
    if j == 0 {
        return Ok(Reconstruction {
            basis: Matrix::zeros(snapshots.n_rows(), 0),
            j,
            k: 0,
            sigma: Vec::new(),
            r22_norm,
            bracket_found: false,
            tau_order_warning,
        });
    }
    let s = svd(&r1)?;
    let count = s.sigma.iter().take_while(|&&x| x > tau2).count();
    let (k, bracket_found) = if count == 0 { (j, false) } else { (count, true) };
    let basis = q.mul(&s.v.leading_columns(k));
    Ok(Reconstruction { basis, j, k, sigma: s.sigma, r22_norm, bracket_found, tau_order_warning })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snaps(m: Matrix) -> SnapshotMatrix {
        SnapshotMatrix::new(m).unwrap()
    }

    fn projection_error_2(s: &Matrix, basis: &Matrix) -> f64 {
        let residual = s.sub(&basis.mul(&basis.adjoint_mul(s)));
        spectral_norm(&residual).unwrap()
    }

    fn check_invariants(a: &Matrix, s: &SvdResult) {
        assert!(s.reconstruct().sub(a).frobenius_norm() <= 1e-12 * a.frobenius_norm());
        assert!(s.v.orthonormality_defect() <= 1e-13);
        assert!(s.w.orthonormality_defect() <= 1e-13);
        assert!(s.sigma.windows(2).all(|p| p[0] >= p[1]));
        assert!(s.sigma.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn diagonal() {
        let a = Matrix::diagonal(2, 2, &[1.0, 2.0]);
        let s = svd(&a).unwrap();
        assert_eq!(s.sigma, alloc::vec![2.0, 1.0]);
        check_invariants(&a, &s);
    }

    #[test]
    fn rank_one_and_zero_columns() {
        let u = [c64(1.0, 0.0), c64(2.0, 0.0), c64(0.0, 2.0)];
        let a = Matrix::from_fn(3, 4, |i, j| if j == 1 { u[i] } else { C64::default() });
        let s = svd(&a).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14);
        assert!(s.sigma[1..].iter().all(|&x| x == 0.0));
        check_invariants(&a, &s);
        check_invariants(&a.adjoint(), &svd(&a.adjoint()).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(svd(&Matrix::zeros(0, 3)), Err(SvdError::Matrix(MatrixError::Empty { .. }))));
        let mut a = Matrix::identity(2);
        a.set(1, 0, c64(f64::NAN, 0.0));
        assert!(matches!(svd(&a), Err(SvdError::Matrix(MatrixError::NonFinite { row: 1, col: 0 }))));
    }

    #[test]
    fn pod_on_diagonal() {
        let p = pod_basis(&snaps(Matrix::diagonal(3, 3, &[3.0, 2.0, 1.0])), 1.5).unwrap();
        assert_eq!(p.k, 2);
        assert!(!p.full_rank);
        for i in 0..3 {
            for j in 0..2 {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((scalar::abs(p.basis.get(i, j)) - expected).abs() < 1e-15);
            }
        }
        assert!(pod_basis(&snaps(Matrix::identity(2)), 0.5).unwrap().full_rank);
    }

    #[test]
    fn optimal_rrqr_on_diagonal() {
        let s = snaps(Matrix::diagonal(3, 3, &[3.0, 2.0, 1.0]));
        let q = optimal_rrqr(&s, 2).unwrap();
        assert!((projection_error_2(s.matrix(), &q) - 1.0).abs() < 1e-14);
        assert!(matches!(optimal_rrqr(&snaps(Matrix::diagonal(3, 3, &[1.0, 1.0, 0.0])), 3), Err(SvdError::RankTooLow { k: 3, rank: 2 })));
    }

    #[test]
    fn reconstruction_on_diagonal() {
        let s = snaps(Matrix::diagonal(4, 4, &[3.0, 2.0, 1.0, 0.0]));
        let r = reconstruct_basis(&s, 1e-12, 1.5).unwrap();
        assert_eq!((r.j, r.k), (3, 2));
        assert!(r.bracket_found);
        assert!((projection_error_2(s.matrix(), &r.basis) - 1.0).abs() < 1e-14);
        let r = reconstruct_basis(&s, 1e-12, 10.0).unwrap();
        assert_eq!(r.k, r.j);
        assert!(!r.bracket_found && r.tau_order_warning);
    }
}
