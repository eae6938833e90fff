//! Small dense factorizations: Householder QR and LU with partial pivoting.

use alloc::vec::Vec;

use crate::matrix::Matrix;
use crate::scalar::{self, c64, C64};

struct Reflectors {
    /// `(k, v, beta)`: `H_k = I - beta v v^H` acting on rows `k..`.
    list: Vec<(usize, Vec<C64>, f64)>,
    rows: usize,
}

impl Reflectors {
    /// First `cols` columns of `H_0 H_1 ... H_{p-1}`.
    fn form_q(&self, cols: usize) -> Matrix {
        let mut q = Matrix::from_fn(self.rows, cols, |i, j| if i == j { c64(1.0, 0.0) } else { C64::default() });
        for (k, v, beta) in self.list.iter().rev() {
            for j in 0..cols {
                let col = &mut q.col_mut(j)[*k..];
                let h = scalar::dotc(v, col) * *beta;
                scalar::axpy(-h, v, col);
            }
        }
        q
    }
}

fn reduce(a: &Matrix) -> (Reflectors, Matrix) {
    let (m, n) = (a.rows(), a.cols());
    let mut r = a.clone();
    let mut list = Vec::new();
    for k in 0..m.min(n) {
        let x = &r.col(k)[k..];
        let xnorm = scalar::norm(x);
        if xnorm == 0.0 {
            continue;
        }
        let x0 = x[0];
        let phase = if scalar::abs(x0) == 0.0 { c64(1.0, 0.0) } else { x0 / scalar::abs(x0) };
        // v = x + phase * ||x|| e_1 maps x onto -phase * ||x|| e_1
        let mut v = x.to_vec();
        v[0] += phase * xnorm;
        let vnorm_sq = scalar::norm_sq(&v);
        let beta = 2.0 / vnorm_sq;
        for j in k..n {
            let col = &mut r.col_mut(j)[k..];
            let h = scalar::dotc(&v, col) * beta;
            scalar::axpy(-h, &v, col);
        }
        for i in k + 1..m {
            r.set(i, k, C64::default());
        }
        list.push((k, v, beta));
    }
    (Reflectors { list, rows: m }, r)
}

/// Householder QR of an `m x n` matrix: returns unitary `Q` (m x m) and
/// upper-trapezoidal `R` (m x n) with `A = Q R`.
pub fn householder_qr(a: &Matrix) -> (Matrix, Matrix) {
    let (refl, r) = reduce(a);
    (refl.form_q(a.rows()), r)
}

/// Economy QR: `Q` is `m x p`, `R` is `p x n`, `p = min(m, n)`.
pub fn householder_qr_thin(a: &Matrix) -> (Matrix, Matrix) {
    let p = a.rows().min(a.cols());
    let (refl, r) = reduce(a);
    (refl.form_q(p), r.submatrix(0..p, 0..a.cols()))
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("matrix is singular to working precision at pivot {pivot}")]
pub struct SingularMatrix {
    pub pivot: usize,
}

/// LU factorization with partial (row) pivoting of a square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn factor(a: &Matrix) -> Result<Self, SingularMatrix> {
        assert_eq!(a.rows(), a.cols(), "LU needs a square matrix");
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, scalar::abs(lu.get(i, k))))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if !(pmax > scale * 1e-300) || pmax == 0.0 {
                return Err(SingularMatrix { pivot: k });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu.get(k, j);
                    lu.set(k, j, lu.get(p, j));
                    lu.set(p, j, t);
                }
            }
            let pivot = lu.get(k, k);
            for i in k + 1..n {
                let l = lu.get(i, k) / pivot;
                lu.set(i, k, l);
                for j in k + 1..n {
                    let updated = lu.get(i, j) - l * lu.get(k, j);
                    lu.set(i, j, updated);
                }
            }
        }
        Ok(Lu { lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let mut x: Vec<C64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu.get(i, j) * x[j];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = alloc::vec![C64::default(); n];
        for j in 0..n {
            e.fill(C64::default());
            e[j] = c64(1.0, 0.0);
            let x = self.solve(&e);
            inv.col_mut(j).copy_from_slice(&x);
        }
        inv
    }
}
