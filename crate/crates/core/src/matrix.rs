//! Dense column-major complex matrices, snapshot matrices and permutations.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::scalar::{self, c64, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatrixError {
    #[error("matrix has zero rows or columns ({rows}x{cols})")]
    Empty { rows: usize, cols: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("data length {len} does not match shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("dimension mismatch: expected {expected} rows, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("not a permutation of 0..{len}")]
    NotPermutation { len: usize },
}

/// Dense complex matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C64::default(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = c64(1.0, 0.0);
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self, MatrixError> {
        if data.len() != rows * cols {
            return Err(MatrixError::ShapeMismatch { rows, cols, len: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(rows: usize, columns: &[Vec<C64>]) -> Result<Self, MatrixError> {
        let mut m = Self::zeros(rows, 0);
        for c in columns {
            m.push_column(c)?;
        }
        Ok(m)
    }

    /// Real diagonal matrix of the given shape.
    pub fn diagonal(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, d) in diag.iter().enumerate().take(rows.min(cols)) {
            m.set(i, i, c64(*d, 0.0));
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, z: C64) {
        self.data[j * self.rows + i] = z;
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [C64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[C64]> {
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn push_column(&mut self, column: &[C64]) -> Result<(), MatrixError> {
        if column.len() != self.rows {
            return Err(MatrixError::DimensionMismatch { expected: self.rows, found: column.len() });
        }
        self.data.extend_from_slice(column);
        self.cols += 1;
        Ok(())
    }

    /// Copies the listed columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * indices.len());
        for &j in indices {
            data.extend_from_slice(self.col(j));
        }
        Matrix { rows: self.rows, cols: indices.len(), data }
    }

    /// Leading `k` columns.
    pub fn leading_columns(&self, k: usize) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: k,
            data: self.data[..k * self.rows].to_vec(),
        }
    }

    pub fn submatrix(&self, rows: Range<usize>, cols: Range<usize>) -> Matrix {
        let (r0, nr) = (rows.start, rows.len());
        Matrix::from_fn(nr, cols.len(), |i, j| self.get(r0 + i, cols.start + j))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// `self * other`.
    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for l in 0..self.cols {
                let b = other.get(l, j);
                if b != C64::default() {
                    scalar::axpy(b, self.col(l), dst);
                }
            }
        }
        out
    }

    /// `self^H * other`, formed from column inner products.
    pub fn adjoint_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "row dimensions differ");
        Matrix::from_fn(self.cols, other.cols, |i, j| scalar::dotc(self.col(i), other.col(j)))
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale_columns(&mut self, factors: &[f64]) {
        for (j, f) in factors.iter().enumerate().take(self.cols) {
            scalar::scale(*f, self.col_mut(j));
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        scalar::norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        scalar::max_abs(&self.data)
    }

    /// `max |(A^H A - I)_{ij}|`, the orthonormality defect of the columns.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut g = scalar::dotc(self.col(i), self.col(j));
                if i == j {
                    g -= c64(1.0, 0.0);
                }
                worst = worst.max(scalar::abs(g));
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| scalar::is_finite(*z))
    }
}

/// Snapshot matrix: columns are model evaluations, with cached squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotMatrix {
    data: Matrix,
    col_norms_sq: Vec<f64>,
}

impl SnapshotMatrix {
    /// Validates shape and finiteness, then caches the column norms.
    pub fn new(data: Matrix) -> Result<Self, MatrixError> {
        if data.rows == 0 || data.cols == 0 {
            return Err(MatrixError::Empty { rows: data.rows, cols: data.cols });
        }
        for j in 0..data.cols {
            if let Some(i) = data.col(j).iter().position(|z| !scalar::is_finite(*z)) {
                return Err(MatrixError::NonFinite { row: i, col: j });
            }
        }
        let col_norms_sq = data.columns().map(scalar::norm_sq).collect();
        Ok(Self { data, col_norms_sq })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.data.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.data.cols
    }

    #[inline]
    pub fn column(&self, i: usize) -> &[C64] {
        self.data.col(i)
    }

    /// Cached `||s_i||^2`.
    pub fn column_norm_sq(&self, i: usize) -> Result<f64, MatrixError> {
        self.col_norms_sq
            .get(i)
            .copied()
            .ok_or(MatrixError::IndexOutOfRange { index: i, len: self.n_cols() })
    }

    pub fn col_norms_sq(&self) -> &[f64] {
        &self.col_norms_sq
    }

    pub fn matrix(&self) -> &Matrix {
        &self.data
    }

    pub fn into_matrix(self) -> Matrix {
        self.data
    }

    pub fn select_columns(&self, indices: &[usize]) -> SnapshotMatrix {
        SnapshotMatrix {
            data: self.data.select_columns(indices),
            col_norms_sq: indices.iter().map(|&i| self.col_norms_sq[i]).collect(),
        }
    }

    /// Appends the columns of `other`; row counts must agree.
    pub fn append(&mut self, other: &SnapshotMatrix) -> Result<(), MatrixError> {
        if other.n_rows() != self.n_rows() {
            return Err(MatrixError::DimensionMismatch { expected: self.n_rows(), found: other.n_rows() });
        }
        self.data.data.extend_from_slice(&other.data.data);
        self.data.cols += other.n_cols();
        self.col_norms_sq.extend_from_slice(&other.col_norms_sq);
        Ok(())
    }
}

/// Column permutation stored as an index vector: position `p` holds the
/// original column placed there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    order: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self, MatrixError> {
        let n = order.len();
        let mut seen = vec![false; n];
        for &i in &order {
            if i >= n || core::mem::replace(&mut seen[i], true) {
                return Err(MatrixError::NotPermutation { len: n });
            }
        }
        Ok(Self { order })
    }

    pub fn identity(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    /// Completes a pivot prefix with the unselected columns in ascending order.
    pub fn from_prefix(prefix: &[usize], n: usize) -> Result<Self, MatrixError> {
        let mut taken = vec![false; n];
        for &p in prefix {
            if p >= n || core::mem::replace(&mut taken[p], true) {
                return Err(MatrixError::NotPermutation { len: n });
            }
        }
        let mut order = prefix.to_vec();
        order.extend((0..n).filter(|&i| !taken[i]));
        Ok(Self { order })
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.order.len()];
        for (p, &i) in self.order.iter().enumerate() {
            inv[i] = p;
        }
        Permutation { order: inv }
    }

    /// `A * Pi`: column `p` of the result is column `order[p]` of `a`.
    pub fn apply_to_columns(&self, a: &Matrix) -> Matrix {
        a.select_columns(&self.order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn column_norms_are_cached() {
        let m = Matrix::from_col_major(2, 2, vec![c64(1.0, 0.0), c64(0.0, 0.0), c64(3.0, 0.0), c64(0.0, 4.0)])
            .unwrap();
        let s = SnapshotMatrix::new(m).unwrap();
        assert_eq!(s.column_norm_sq(0).unwrap(), 1.0);
        assert_eq!(s.column_norm_sq(1).unwrap(), 25.0);
        assert_eq!(s.column_norm_sq(2), Err(MatrixError::IndexOutOfRange { index: 2, len: 2 }));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        let mut m = Matrix::zeros(3, 2);
        m.set(2, 1, c64(f64::NAN, 0.0));
        assert_eq!(SnapshotMatrix::new(m), Err(MatrixError::NonFinite { row: 2, col: 1 }));
        assert!(matches!(SnapshotMatrix::new(Matrix::zeros(0, 4)), Err(MatrixError::Empty { .. })));
    }

    #[test]
    fn mul_and_adjoint_agree() {
        let a = Matrix::from_fn(3, 2, |i, j| c64(i as f64, j as f64 + 1.0));
        let b = Matrix::from_fn(3, 4, |i, j| c64(1.0 - j as f64, i as f64));
        let lhs = a.adjoint_mul(&b);
        let rhs = a.adjoint().mul(&b);
        assert!(lhs.sub(&rhs).max_abs() < 1e-13);
    }

    #[test]
    fn permutation_from_prefix() {
        let p = Permutation::from_prefix(&[3, 1], 5).unwrap();
        assert_eq!(p.as_slice(), &[3, 1, 0, 2, 4]);
        assert!(Permutation::from_prefix(&[1, 1], 3).is_err());
        assert!(Permutation::new(vec![0, 2]).is_err());
    }

    proptest! {
        #[test]
        fn prefix_completion_is_a_bijection(n in 1usize..40, seed in any::<u64>()) {
            let mut idx: Vec<usize> = (0..n).collect();
            // cheap deterministic shuffle
            let mut s = seed | 1;
            for i in (1..n).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                idx.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let k = (seed as usize) % (n + 1);
            let p = Permutation::from_prefix(&idx[..k], n).unwrap();
            prop_assert!(Permutation::new(p.as_slice().to_vec()).is_ok());
            prop_assert_eq!(&p.as_slice()[..k], &idx[..k]);
            let inv = p.inverse();
            for (pos, &i) in p.as_slice().iter().enumerate() {
                prop_assert_eq!(inv.as_slice()[i], pos);
            }
        }
    }
}
