//! Projection errors of a basis, out-of-sample validation and enrichment.

use alloc::vec::Vec;
use core::ops::Range;

use crate::exec::{self, Clock, Executor};
use crate::greedy::{self, GreedyError, GreedyOptions, GreedyReport, GreedyState};
use crate::matrix::{Matrix, MatrixError, SnapshotMatrix};
use crate::scalar::{self, C64};
use crate::svd::{self, SvdError};

/// Largest `|(Q^H Q - I)_ij|` accepted by the estimators.
pub const ORTHONORMALITY_CHECK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimatorError {
    #[error("basis is not orthonormal: max |Q^H Q - I| = {0:e}")]
    NotOrthonormal(f64),
    #[error("basis has {basis} rows, snapshots have {snapshots}")]
    DimensionMismatch { basis: usize, snapshots: usize },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Svd(#[from] SvdError),
    #[error(transparent)]
    Greedy(#[from] GreedyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// `||S - Q Q^H S||_2`.
    pub qr_err_2: f64,
    /// `||S - Q Q^H S||_F`.
    pub qr_err_f: f64,
    /// Largest column error.
    pub qr_err_max: f64,
    /// `||s_i - Q Q^H s_i||_2` for every column.
    pub per_column: Vec<f64>,
    /// Norms of an explicit trailing block, when one was supplied.
    pub r22_2: Option<f64>,
    pub r22_f: Option<f64>,
}

impl ErrorReport {
    /// Records the 2- and Frobenius norms of a trailing block `R_22`.
    pub fn with_trailing_block(mut self, r22: &Matrix) -> Result<Self, EstimatorError> {
        self.r22_2 = Some(svd::spectral_norm(r22)?);
        self.r22_f = Some(r22.frobenius_norm());
        Ok(self)
    }
}

fn check_basis(basis: &Matrix, rows: usize) -> Result<(), EstimatorError> {
    if basis.rows() != rows {
        return Err(EstimatorError::DimensionMismatch { basis: basis.rows(), snapshots: rows });
    }
    let defect = basis.orthonormality_defect();
    if !(defect <= ORTHONORMALITY_CHECK) {
        return Err(EstimatorError::NotOrthonormal(defect));
    }
    Ok(())
}

/// `S - Q Q^H S`, computed column by column over the executor.
pub fn residual_matrix<E: Executor>(snapshots: &SnapshotMatrix, basis: &Matrix, exec: &E) -> Matrix {
    let (n, m) = (snapshots.n_rows(), snapshots.n_cols());
    let mut out = Matrix::zeros(n, m);
    let ranges = exec::partition(m, exec.workers());
    let mut items: Vec<(Range<usize>, &mut [C64])> = ranges
        .iter()
        .cloned()
        .zip(exec::split_by_ranges(out.as_mut_slice(), &scaled(&ranges, n)))
        .collect();
    exec.for_each_mut(&mut items, |(cols, block)| {
        for (off, i) in cols.clone().enumerate() {
            let r = &mut block[off * n..(off + 1) * n];
            r.copy_from_slice(snapshots.column(i));
            for q in basis.columns() {
                let c = scalar::dotc(q, snapshots.column(i));
                scalar::axpy(-c, q, r);
            }
        }
    });
    out
}

fn scaled(ranges: &[Range<usize>], n: usize) -> Vec<Range<usize>> {
    ranges.iter().map(|r| r.start * n..r.end * n).collect()
}

/// Projection errors of `snapshots` onto the span of an orthonormal `basis`.
pub fn projection_errors<E: Executor>(
    snapshots: &SnapshotMatrix,
    basis: &Matrix,
    exec: &E,
) -> Result<ErrorReport, EstimatorError> {
    check_basis(basis, snapshots.n_rows())?;
    let residual = residual_matrix(snapshots, basis, exec);
    let per_column: Vec<f64> = residual.columns().map(scalar::norm).collect();
    let qr_err_f = scalar::sqrt(per_column.iter().map(|e| e * e).sum());
    let qr_err_max = per_column.iter().copied().fold(0.0, f64::max);
    let qr_err_2 = if qr_err_f == 0.0 { 0.0 } else { svd::spectral_norm(&residual)? };
    Ok(ErrorReport { qr_err_2, qr_err_f, qr_err_max, per_column, r22_2: None, r22_f: None })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    /// Every column as `(index, error)`, largest error first.
    pub worst: Vec<(usize, f64)>,
    pub pass: bool,
}

impl Validation {
    pub fn max_error(&self) -> f64 {
        self.worst.first().map_or(0.0, |w| w.1)
    }

    pub fn failing(&self, tau: f64) -> Vec<usize> {
        self.worst.iter().take_while(|w| !(w.1 < tau)).map(|w| w.0).collect()
    }

    pub fn pass_rate(&self, tau: f64) -> f64 {
        if self.worst.is_empty() {
            return 1.0;
        }
        1.0 - self.failing(tau).len() as f64 / self.worst.len() as f64
    }
}

/// Passes iff every column of `samples` is approximated to better than `tau`.
pub fn validate<E: Executor>(
    basis: &Matrix,
    samples: &SnapshotMatrix,
    tau: f64,
    exec: &E,
) -> Result<Validation, EstimatorError> {
    if !(tau > 0.0) {
        return Err(EstimatorError::InvalidTolerance(tau));
    }
    check_basis(basis, samples.n_rows())?;
    let residual = residual_matrix(samples, basis, exec);
    let mut worst: Vec<(usize, f64)> = residual.columns().map(scalar::norm).enumerate().collect();
    worst.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let pass = worst.iter().all(|w| w.1 < tau);
    Ok(Validation { worst, pass })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrichOutcome {
    /// Rounds in which columns were appended.
    pub rounds: usize,
    pub passed: bool,
    /// Largest validation error before the first round and after each round.
    pub max_errors: Vec<f64>,
    /// Basis size before the first round and after each round.
    pub basis_sizes: Vec<usize>,
    pub appended: Vec<usize>,
}

/// Validates against `samples`, appends every failing column to the training
/// set and continues the greedy, for at most `rounds` rounds. Each round
/// runs to `opts.tau`; `opts.k_max` does not cap the enriched basis.
pub fn enrich<E: Executor, C: Clock>(
    state: &mut GreedyState,
    report: &mut GreedyReport,
    samples: &SnapshotMatrix,
    opts: &GreedyOptions,
    rounds: usize,
    exec: &E,
    clock: &C,
) -> Result<EnrichOutcome, EstimatorError> {
    let mut v = validate(state.basis(), samples, opts.tau, exec)?;
    let mut outcome = EnrichOutcome {
        rounds: 0,
        passed: v.pass,
        max_errors: alloc::vec![v.max_error()],
        basis_sizes: alloc::vec![state.k()],
        appended: Vec::new(),
    };
    while !v.pass && outcome.rounds < rounds {
        let failing = v.failing(opts.tau);
        state.append_columns(&samples.select_columns(&failing), exec)?;
        let mut round_opts = *opts;
        round_opts.k_max = state.snapshots().n_rows().min(state.snapshots().n_cols());
        greedy::greedy_resume(state, report, &round_opts, exec, clock)?;
        v = validate(state.basis(), samples, opts.tau, exec)?;
        outcome.rounds += 1;
        outcome.passed = v.pass;
        outcome.max_errors.push(v.max_error());
        outcome.basis_sizes.push(state.k());
        outcome.appended.push(failing.len());
    }
    Ok(outcome)
}
