//! Synthetic parametrized models used as snapshot generators.

use alloc::vec::Vec;
use core::ops::Range;

use crate::exec::{self, Executor};
use crate::matrix::{Matrix, MatrixError, SnapshotMatrix};
use crate::scalar::{self, c64, C64};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid is not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("no parameters given")]
    NoParameters,
    #[error("parameter {column}: {reason}")]
    InvalidParameter { column: usize, reason: &'static str },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// `exp(-d x) exp(i f x^2)` with parameters `(f, d)`.
    DampedChirp,
    /// `exp(-(x - c)^2 / w^2)` with parameters `(c, w)`.
    GaussianBump,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::DampedChirp => "damped_chirp",
            Model::GaussianBump => "gaussian_bump",
        }
    }

    pub fn from_name(name: &str) -> Option<Model> {
        match name {
            "damped_chirp" | "chirp" => Some(Model::DampedChirp),
            "gaussian_bump" | "gaussian" => Some(Model::GaussianBump),
            _ => None,
        }
    }

    fn check(self, p: [f64; 2]) -> Result<(), &'static str> {
        match self {
            Model::DampedChirp => {
                if !(p[0].is_finite() && p[0] >= 0.0) {
                    return Err("frequency must be finite and non-negative");
                }
                if !(p[1].is_finite() && p[1] >= 0.0) {
                    return Err("damping must be finite and non-negative");
                }
            }
            Model::GaussianBump => {
                if !p[0].is_finite() {
                    return Err("center must be finite");
                }
                if !(p[1].is_finite() && p[1] > 0.0) {
                    return Err("width must be finite and positive");
                }
            }
        }
        Ok(())
    }

    fn eval_into(self, p: [f64; 2], grid: &[f64], out: &mut [C64]) {
        match self {
            Model::DampedChirp => {
                for (o, &x) in out.iter_mut().zip(grid) {
                    *o = scalar::cis(p[0] * x * x) * libm::exp(-p[1] * x);
                }
            }
            Model::GaussianBump => {
                for (o, &x) in out.iter_mut().zip(grid) {
                    let t = (x - p[0]) / p[1];
                    *o = c64(libm::exp(-t * t), 0.0);
                }
            }
        }
    }
}

fn check_grid(grid: &[f64]) -> Result<(), ModelError> {
    if grid.is_empty() {
        return Err(ModelError::EmptyGrid);
    }
    if let Some(i) = grid.iter().position(|x| !x.is_finite()) {
        return Err(ModelError::NotIncreasing(i));
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(ModelError::NotIncreasing(i + 1));
    }
    Ok(())
}

fn evaluate(model: Model, p: [f64; 2], grid: &[f64]) -> Result<Vec<C64>, ModelError> {
    check_grid(grid)?;
    model.check(p).map_err(|reason| ModelError::InvalidParameter { column: 0, reason })?;
    let mut out = alloc::vec![C64::default(); grid.len()];
    model.eval_into(p, grid, &mut out);
    Ok(out)
}

pub fn damped_chirp(frequency: f64, damping: f64, grid: &[f64]) -> Result<Vec<C64>, ModelError> {
    evaluate(Model::DampedChirp, [frequency, damping], grid)
}

pub fn gaussian_bump(center: f64, width: f64, grid: &[f64]) -> Result<Vec<C64>, ModelError> {
    evaluate(Model::GaussianBump, [center, width], grid)
}

/// `n` equispaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![a],
        _ => (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// All pairs `(a_i, b_j)`, with the first parameter varying slowest.
pub fn tensor_grid(a: &[f64], b: &[f64]) -> Vec<[f64; 2]> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| [x, y])).collect()
}

/// Evaluates `model` at every parameter, one column per parameter. Columns
/// are generated in disjoint blocks, so the result does not depend on the
/// number of workers.
pub fn build_snapshot_matrix<E: Executor>(
    model: Model,
    params: &[[f64; 2]],
    grid: &[f64],
    exec: &E,
) -> Result<SnapshotMatrix, ModelError> {
    check_grid(grid)?;
    if params.is_empty() {
        return Err(ModelError::NoParameters);
    }
    for (column, p) in params.iter().enumerate() {
        model.check(*p).map_err(|reason| ModelError::InvalidParameter { column, reason })?;
    }
    let n = grid.len();
    let mut m = Matrix::zeros(n, params.len());
    let ranges = exec::partition(params.len(), exec.workers());
    let cells: Vec<Range<usize>> = ranges.iter().map(|r| r.start * n..r.end * n).collect();
    let mut items: Vec<(Range<usize>, &mut [C64])> =
        ranges.iter().cloned().zip(exec::split_by_ranges(m.as_mut_slice(), &cells)).collect();
    exec.for_each_mut(&mut items, |(cols, block)| {
        for (off, i) in cols.clone().enumerate() {
            model.eval_into(params[i], grid, &mut block[off * n..(off + 1) * n]);
        }
    });
    Ok(SnapshotMatrix::new(m)?)
}
