//! Reduced-basis greedy construction of a column-pivoted QR factorization.
//!
//! Each iteration has two phases. In the pivot search, every column folds the
//! newest basis vector into its coefficient row and its running sum of
//! squared coefficients. The column with the largest squared residual
//! `||s_i||^2 - sum_j |c_ij|^2` is then selected. In the orthogonalization
//! phase, that column is orthogonalized by iterated MGS and appended to the
//! basis.
//!
//! The search runs on disjoint column ranges through an [`Executor`]. All
//! per-column arithmetic is independent of the partition, and the global
//! argmax breaks ties by lowest column index. The pivots and basis are
//! therefore bit-identical for any worker count.
//!
//! Squared residuals computed by the recurrence carry an absolute error of
//! roughly `eps * ||s_i||^2`. When a column's residual drops below
//! `rebase_ratio` times its stored base, its residual is recomputed
//! explicitly. That value becomes the new base and the accumulator restarts
//! from zero.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::exec::{self, Clock, Executor};
use crate::matrix::{Matrix, MatrixError, Permutation, SnapshotMatrix};
use crate::ortho::{self, OrthoError, OrthoResult};
use crate::scalar::{self, C64, EPS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GreedyError {
    #[error("tolerance {0:e} must exceed 1e3 * machine epsilon")]
    ToleranceTooSmall(f64),
    #[error("k_max must be in 1..={limit}, got {k_max}")]
    InvalidBasisLimit { k_max: usize, limit: usize },
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Ortho(#[from] OrthoError),
}

/// Why a greedy run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Every column is approximated to within tau.
    ToleranceReached,
    /// `k_max` basis vectors were built before tau was reached.
    BasisLimit,
    /// The numerical rank was exhausted before tau was reached.
    RankExhausted,
}

impl Termination {
    pub fn reached_tolerance(self) -> bool {
        self == Termination::ToleranceReached
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Termination::ToleranceReached => "tolerance_reached",
            Termination::BasisLimit => "basis_limit",
            Termination::RankExhausted => "rank_exhausted",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreedyOptions {
    pub tau: f64,
    pub k_max: usize,
    pub kappa: f64,
    /// Relative threshold for recomputing residuals explicitly; `None`
    /// uses the bare recurrence.
    pub rebase_ratio: Option<f64>,
}

impl GreedyOptions {
    pub fn new(tau: f64, k_max: usize) -> Self {
        Self { tau, k_max, kappa: ortho::DEFAULT_KAPPA, rebase_ratio: Some(DEFAULT_REBASE_RATIO) }
    }
}

pub const DEFAULT_REBASE_RATIO: f64 = 1e-4;

/// A column index with its squared residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub index: usize,
    pub value: f64,
}

impl Candidate {
    const NONE: Candidate = Candidate { index: usize::MAX, value: f64::NEG_INFINITY };

    /// Larger value wins; equal values go to the lower index.
    #[inline]
    pub fn beats(&self, other: &Candidate) -> bool {
        self.value > other.value || (self.value == other.value && self.index < other.index)
    }

    pub fn reduce(candidates: impl IntoIterator<Item = Candidate>) -> Candidate {
        candidates
            .into_iter()
            .fold(Candidate::NONE, |best, c| if c.beats(&best) { c } else { best })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IterationTiming {
    /// Pivot search plus any parallel overhead.
    pub pivot_plus_c: f64,
    pub imgs: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlopCounters {
    pub pivot: u64,
    pub ortho: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyReport {
    /// Greedy error before each pivot selection (`sigma_hat[j] = R(j+1, j+1)`).
    pub sigma_hat: Vec<f64>,
    /// Greedy error of the final basis.
    pub final_sigma: f64,
    pub pivots: Vec<usize>,
    /// One entry per completed iteration (search + orthogonalization).
    pub timings: Vec<IterationTiming>,
    /// Duration of the closing pivot search that established `final_sigma`.
    pub final_search_time: f64,
    pub flops: FlopCounters,
    pub sweeps: Vec<usize>,
    /// Number of column residuals recomputed explicitly.
    pub rebased_columns: u64,
    pub termination: Termination,
}

impl GreedyReport {
    fn empty() -> Self {
        GreedyReport {
            sigma_hat: Vec::new(),
            final_sigma: f64::NAN,
            pivots: Vec::new(),
            timings: Vec::new(),
            final_search_time: 0.0,
            flops: FlopCounters::default(),
            sweeps: Vec::new(),
            rebased_columns: 0,
            termination: Termination::RankExhausted,
        }
    }

    /// Greedy error after `k` basis vectors, for `k` in `0..=pivots.len()`.
    pub fn error_after(&self, k: usize) -> Option<f64> {
        match k.cmp(&self.sigma_hat.len()) {
            core::cmp::Ordering::Less => Some(self.sigma_hat[k]),
            core::cmp::Ordering::Equal => Some(self.final_sigma),
            core::cmp::Ordering::Greater => None,
        }
    }

    /// Mean number of MGS sweeps per basis vector.
    pub fn mean_sweeps(&self) -> f64 {
        if self.sweeps.is_empty() {
            return 0.0;
        }
        self.sweeps.iter().sum::<usize>() as f64 / self.sweeps.len() as f64
    }

    /// Appends the record of a continued run.
    fn extend(&mut self, other: GreedyReport) {
        self.sigma_hat.extend(other.sigma_hat);
        self.pivots.extend(other.pivots);
        self.timings.extend(other.timings);
        self.sweeps.extend(other.sweeps);
        self.flops.pivot += other.flops.pivot;
        self.flops.ortho += other.flops.ortho;
        self.rebased_columns += other.rebased_columns;
        self.final_sigma = other.final_sigma;
        self.final_search_time = other.final_search_time;
        self.termination = other.termination;
    }
}

/// Greedy basis, coefficient rows and residual accumulators.
#[derive(Debug, Clone)]
pub struct GreedyState {
    snapshots: SnapshotMatrix,
    basis: Matrix,
    /// Row `j` holds `<q_j, s_i>` for every column `i`, in original order.
    r_rows: Vec<Vec<C64>>,
    /// `R(j, j)`: residual norm of pivot `j` from the orthogonalizer.
    r_diag: Vec<f64>,
    pivots: Vec<usize>,
    /// Sum of `|c_ij|^2` since the column's last rebase.
    acc: Vec<f64>,
    /// `||s_i||^2`, or the explicitly computed squared residual at the last rebase.
    base: Vec<f64>,
}

/// Outcome of one pivot search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub rebased: u64,
    pub flops: u64,
}

struct Block<'a> {
    cols: Range<usize>,
    acc: &'a mut [f64],
    base: &'a mut [f64],
    row: &'a mut [C64],
    best: Candidate,
}

impl GreedyState {
    pub fn new(snapshots: SnapshotMatrix) -> Self {
        let m = snapshots.n_cols();
        let base = snapshots.col_norms_sq().to_vec();
        GreedyState {
            basis: Matrix::zeros(snapshots.n_rows(), 0),
            snapshots,
            r_rows: Vec::new(),
            r_diag: Vec::new(),
            pivots: Vec::new(),
            acc: vec![0.0; m],
            base,
        }
    }

    pub fn snapshots(&self) -> &SnapshotMatrix {
        &self.snapshots
    }

    /// Orthonormal basis `Q_k` (N x k).
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn into_basis(self) -> Matrix {
        self.basis
    }

    /// Hands back the training snapshots together with the basis.
    pub fn into_parts(self) -> (SnapshotMatrix, Matrix) {
        (self.snapshots, self.basis)
    }

    pub fn k(&self) -> usize {
        self.basis.cols()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn r_rows(&self) -> &[Vec<C64>] {
        &self.r_rows
    }

    pub fn r_diag(&self) -> &[f64] {
        &self.r_diag
    }

    pub fn acc(&self) -> &[f64] {
        &self.acc
    }

    pub fn norms_sq(&self) -> &[f64] {
        self.snapshots.col_norms_sq()
    }

    /// `R` as a `k x M` matrix with columns in original order.
    pub fn r_matrix(&self) -> Matrix {
        let m = self.snapshots.n_cols();
        Matrix::from_fn(self.r_rows.len(), m, |j, i| self.r_rows[j][i])
    }

    /// Pivot prefix completed to a full column permutation.
    pub fn permutation(&self) -> Permutation {
        Permutation::from_prefix(&self.pivots, self.snapshots.n_cols())
            .expect("pivots are distinct and in range")
    }

    /// Squared residual `||s_i - Q_k Q_k^H s_i||^2` from the recurrence,
    /// clamped at zero.
    pub fn residual_sq(&self, i: usize) -> Result<f64, MatrixError> {
        if i >= self.acc.len() {
            return Err(MatrixError::IndexOutOfRange { index: i, len: self.acc.len() });
        }
        Ok(residual(self.base[i], self.acc[i]))
    }

    /// Folds any basis vectors not yet reflected in the coefficient rows,
    /// then finds the column with the largest residual.
    pub fn search<E: Executor>(&mut self, exec: &E, rebase_ratio: Option<f64>) -> SearchOutcome {
        let m = self.snapshots.n_cols();
        let n = self.snapshots.n_rows();
        let ranges = exec::partition(m, exec.workers());
        let mut flops = 0u64;
        let mut best = Candidate::NONE;

        let pending: Vec<usize> = (self.r_rows.len()..self.basis.cols()).collect();
        if pending.is_empty() {
            best = Candidate::reduce(local_bests(&self.base, &self.acc, &ranges));
        }
        for j in pending {
            self.r_rows.push(vec![C64::default(); m]);
            let q = self.basis.col(j);
            let snapshots = &self.snapshots;
            let mut blocks = make_blocks(&ranges, &mut self.acc, &mut self.base, &mut self.r_rows[j]);
            exec.for_each_mut(&mut blocks, |b| {
                let mut local = Candidate::NONE;
                for (off, i) in b.cols.clone().enumerate() {
                    let c = scalar::dotc(q, snapshots.column(i));
                    b.row[off] = c;
                    b.acc[off] += c.norm_sqr();
                    let cand = Candidate { index: i, value: residual(b.base[off], b.acc[off]) };
                    if cand.beats(&local) {
                        local = cand;
                    }
                }
                b.best = local;
            });
            best = Candidate::reduce(blocks.iter().map(|b| b.best));
            flops += 2 * (n as u64) * (m as u64);
        }

        let mut rebased = 0;
        if let Some(ratio) = rebase_ratio {
            // A rebased column's residual never exceeds the new maximum, so
            // two passes suffice; the cap guards against pathological input.
            for _ in 0..4 {
                let threshold = best.value.max(0.0);
                let count = self.rebase(exec, &ranges, ratio, threshold);
                if count == 0 {
                    break;
                }
                rebased += count;
                flops += count * 2 * (n as u64) * (self.basis.cols() as u64);
                best = Candidate::reduce(local_bests(&self.base, &self.acc, &ranges));
            }
        }
        SearchOutcome { best, rebased, flops }
    }

    /// Recomputes the residual of every column whose recurrence value is
    /// no longer resolvable against `threshold`.
    fn rebase<E: Executor>(&mut self, exec: &E, ranges: &[Range<usize>], ratio: f64, threshold: f64) -> u64 {
        let stale = |base: f64| ratio * base > threshold;
        if self.basis.cols() == 0 || !self.base.iter().any(|&b| stale(b)) {
            return 0;
        }
        let (snapshots, basis, r_rows) = (&self.snapshots, &self.basis, &self.r_rows);
        let accs = exec::split_by_ranges(&mut self.acc, ranges);
        let bases = exec::split_by_ranges(&mut self.base, ranges);
        let mut items: Vec<(Range<usize>, &mut [f64], &mut [f64], u64)> = ranges
            .iter()
            .cloned()
            .zip(accs)
            .zip(bases)
            .map(|((cols, acc), base)| (cols, acc, base, 0))
            .collect();
        exec.for_each_mut(&mut items, |(cols, acc, base, count)| {
            let mut r = vec![C64::default(); snapshots.n_rows()];
            for (off, i) in cols.clone().enumerate() {
                if !stale(base[off]) {
                    continue;
                }
                r.copy_from_slice(snapshots.column(i));
                for (j, row) in r_rows.iter().enumerate() {
                    scalar::axpy(-row[i], basis.col(j), &mut r);
                }
                base[off] = scalar::norm_sq(&r);
                acc[off] = 0.0;
                *count += 1;
            }
        });
        items.iter().map(|it| it.3).sum()
    }

    /// Orthogonalizes column `pivot` against the basis and appends it.
    pub fn extend(&mut self, pivot: usize, kappa: f64) -> Result<OrthoResult, GreedyError> {
        if pivot >= self.snapshots.n_cols() {
            return Err(MatrixError::IndexOutOfRange { index: pivot, len: self.snapshots.n_cols() }.into());
        }
        let result = ortho::imgs_orthogonalize(&self.basis, self.snapshots.column(pivot), kappa)?;
        self.basis.push_column(&result.q)?;
        self.pivots.push(pivot);
        self.r_diag.push(result.residual_norm);
        Ok(result)
    }

    /// Appends training columns, projecting them onto the current basis.
    pub fn append_columns<E: Executor>(&mut self, extra: &SnapshotMatrix, exec: &E) -> Result<(), GreedyError> {
        let m0 = self.snapshots.n_cols();
        self.snapshots.append(extra)?;
        let m = self.snapshots.n_cols();
        self.base.extend_from_slice(extra.col_norms_sq());
        self.acc.resize(m, 0.0);
        for row in self.r_rows.iter_mut() {
            row.resize(m, C64::default());
        }
        let ranges: Vec<Range<usize>> = exec::partition(m - m0, exec.workers())
            .into_iter()
            .map(|r| r.start + m0..r.end + m0)
            .collect();
        let mut items: Vec<(Range<usize>, Vec<C64>, f64)> =
            ranges.into_iter().map(|r| (r, Vec::new(), 0.0)).collect();
        let folded = self.r_rows.len();
        let (snapshots, basis) = (&self.snapshots, &self.basis);
        exec.for_each_mut(&mut items, |(cols, coeffs, _)| {
            for i in cols.clone() {
                for j in 0..folded {
                    coeffs.push(scalar::dotc(basis.col(j), snapshots.column(i)));
                }
            }
        });
        for (cols, coeffs, _) in items {
            for (off, i) in cols.enumerate() {
                let c = &coeffs[off * folded..(off + 1) * folded];
                for (j, cj) in c.iter().enumerate() {
                    self.r_rows[j][i] = *cj;
                    self.acc[i] += cj.norm_sqr();
                }
            }
        }
        Ok(())
    }
}

#[inline]
fn residual(base: f64, acc: f64) -> f64 {
    (base - acc).max(0.0)
}

fn local_bests(base: &[f64], acc: &[f64], ranges: &[Range<usize>]) -> Vec<Candidate> {
    ranges
        .iter()
        .map(|r| {
            Candidate::reduce(r.clone().map(|i| Candidate { index: i, value: residual(base[i], acc[i]) }))
        })
        .collect()
}

fn make_blocks<'a>(
    ranges: &[Range<usize>],
    acc: &'a mut [f64],
    base: &'a mut [f64],
    row: &'a mut [C64],
) -> Vec<Block<'a>> {
    let accs = exec::split_by_ranges(acc, ranges);
    let bases = exec::split_by_ranges(base, ranges);
    let rows = exec::split_by_ranges(row, ranges);
    ranges
        .iter()
        .zip(accs)
        .zip(bases)
        .zip(rows)
        .map(|(((cols, acc), base), row)| Block {
            cols: cols.clone(),
            acc,
            base,
            row,
            best: Candidate::NONE,
        })
        .collect()
}

/// Global argmax of the recurrence residuals over a caller-chosen partition.
/// Ties go to the lowest column index; `(0, 0.0)` when every residual is zero.
pub fn pivot_search(state: &GreedyState, partition: &[Range<usize>]) -> Candidate {
    let best = Candidate::reduce(local_bests(&state.base, &state.acc, partition));
    if best.index == usize::MAX {
        Candidate { index: 0, value: 0.0 }
    } else {
        best
    }
}

/// Closed-form operation counts of the greedy: `(2MNk, nu N k (k+1) / 2)`.
pub fn flop_estimate(n: usize, m: usize, k: usize, nu_hat: f64) -> (f64, f64) {
    let (n, m, k) = (n as f64, m as f64, k as f64);
    (2.0 * m * n * k, 0.5 * nu_hat * n * k * (k + 1.0))
}

/// Operation count of MGS with pivoting after `k` steps: `6kNM - 3Nk^2`.
pub fn mgs_flop_estimate(n: usize, m: usize, k: usize) -> f64 {
    let (n, m, k) = (n as f64, m as f64, k as f64);
    6.0 * k * n * m - 3.0 * n * k * k
}

/// Operation count of the naive greedy (no stored projections): `3/2 k^2 N M`.
pub fn naive_greedy_flop_estimate(n: usize, m: usize, k: usize) -> f64 {
    let (n, m, k) = (n as f64, m as f64, k as f64);
    1.5 * k * k * n * m
}

fn check_options(snapshots: &SnapshotMatrix, opts: &GreedyOptions) -> Result<(), GreedyError> {
    if !(opts.tau > 1e3 * EPS) {
        return Err(GreedyError::ToleranceTooSmall(opts.tau));
    }
    let limit = snapshots.n_rows().min(snapshots.n_cols());
    if opts.k_max == 0 || opts.k_max > limit {
        return Err(GreedyError::InvalidBasisLimit { k_max: opts.k_max, limit });
    }
    if !(opts.kappa > 1.0) {
        return Err(OrthoError::InvalidKappa(opts.kappa).into());
    }
    Ok(())
}

/// Runs the greedy from scratch until every column is within `opts.tau`.
pub fn greedy_build<E: Executor, C: Clock>(
    snapshots: SnapshotMatrix,
    opts: &GreedyOptions,
    exec: &E,
    clock: &C,
) -> Result<(GreedyState, GreedyReport), GreedyError> {
    check_options(&snapshots, opts)?;
    let mut state = GreedyState::new(snapshots);
    let report = greedy_continue(&mut state, opts, exec, clock)?;
    Ok((state, report))
}

/// Continues a greedy run from its current basis. Used directly by
/// enrichment after new training columns are appended.
pub fn greedy_continue<E: Executor, C: Clock>(
    state: &mut GreedyState,
    opts: &GreedyOptions,
    exec: &E,
    clock: &C,
) -> Result<GreedyReport, GreedyError> {
    if !(opts.tau > 1e3 * EPS) {
        return Err(GreedyError::ToleranceTooSmall(opts.tau));
    }
    let k_cap = opts.k_max.min(state.snapshots.n_rows()).min(state.snapshots.n_cols());
    let tau_sq = opts.tau * opts.tau;
    let mut report = GreedyReport::empty();
    loop {
        let t0 = clock.now();
        let outcome = state.search(exec, opts.rebase_ratio);
        let t1 = clock.now();
        report.flops.pivot += outcome.flops;
        report.rebased_columns += outcome.rebased;
        let best = outcome.best;
        let value = best.value.max(0.0);

        let stop = if value < tau_sq {
            Some(Termination::ToleranceReached)
        } else if state.k() >= k_cap {
            Some(Termination::BasisLimit)
        } else {
            None
        };
        if let Some(t) = stop {
            report.final_sigma = scalar::sqrt(value);
            report.final_search_time = t1 - t0;
            report.termination = t;
            return Ok(report);
        }

        let ortho = match state.extend(best.index, opts.kappa) {
            Ok(o) => o,
            Err(GreedyError::Ortho(OrthoError::Degenerate { .. })) => {
                report.final_sigma = scalar::sqrt(value);
                report.final_search_time = t1 - t0;
                report.termination = Termination::RankExhausted;
                return Ok(report);
            }
            Err(e) => return Err(e),
        };
        let t2 = clock.now();
        report.sigma_hat.push(scalar::sqrt(value));
        report.pivots.push(best.index);
        report.sweeps.push(ortho.sweeps);
        report.flops.ortho += ortho.projections * state.snapshots.n_rows() as u64;
        let t3 = clock.now();
        report.timings.push(IterationTiming { pivot_plus_c: t1 - t0, imgs: t2 - t1, total: t3 - t0 });
    }
}

/// Continues `report` with a further run on the same state.
pub fn greedy_resume<E: Executor, C: Clock>(
    state: &mut GreedyState,
    report: &mut GreedyReport,
    opts: &GreedyOptions,
    exec: &E,
    clock: &C,
) -> Result<(), GreedyError> {
    let more = greedy_continue(state, opts, exec, clock)?;
    report.extend(more);
    Ok(())
}
