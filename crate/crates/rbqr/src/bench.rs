//! Strong and weak scaling runs of the threaded greedy.
//!
//! Each worker count runs the full greedy for `k` iterations and records
//! per-iteration timings. Medians skip the first [`WARMUP`] iterations.
//! Pivots and basis must come out identical for every worker count; a
//! mismatch aborts the run, since its timings would be meaningless.

use std::fmt::Write as _;

use rbqr_core::exec::{NoClock, Serial};
use rbqr_core::greedy::{greedy_build, GreedyError, GreedyOptions, GreedyReport, IterationTiming};
use rbqr_core::matrix::{Matrix, SnapshotMatrix};

use crate::exec::{Threads, WallClock};
use crate::random::gaussian_matrix;
use crate::report::Table;

pub const WARMUP: usize = 3;

/// Iterations before this index are left out of the `T_imgs` line fit.
pub const FIT_FROM: usize = 10;

/// Smallest tolerance the greedy accepts, so runs go to `k` on full-rank data.
const BENCH_TAU: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("worker counts must be increasing and start at 1, got {0:?}")]
    WorkerCounts(Vec<usize>),
    #[error("{workers} workers changed the {what}; timings discarded")]
    Nondeterministic { workers: usize, what: &'static str },
    #[error(transparent)]
    Greedy(#[from] GreedyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Strong,
    Weak,
}

#[derive(Debug, Clone)]
pub struct ScalingPoint {
    pub workers: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub k: usize,
    pub timings: Vec<IterationTiming>,
    pub median_pivot: f64,
    pub median_imgs: f64,
    pub median_total: f64,
    /// Whole run, including the closing search.
    pub run_time: f64,
    pub mean_sweeps: f64,
    /// Strong: `T_1 / (C T_C)` on the median pivot time. Weak: ratio of
    /// run times per iteration, one worker over `C`.
    pub efficiency: f64,
    pub speedup: f64,
    /// `1 - nu k (C - 1) / (2 M)`.
    pub predicted_efficiency: f64,
    /// Largest over smallest pivot time after warmup.
    pub pivot_spread: f64,
    /// Coefficient of determination of a line fit to `T_imgs(j)`, `j >= FIT_FROM`.
    pub imgs_r_squared: f64,
    /// Largest `|T_total - (T_pivot + T_imgs)| / T_total`.
    pub identity_max_rel: f64,
}

#[derive(Debug, Clone)]
pub struct Scaling {
    pub mode: Mode,
    pub points: Vec<ScalingPoint>,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// R^2 of the least-squares line through `(x, y)`. A constant `y` fits exactly.
pub fn r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() < 3 {
        return f64::NAN;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}

pub fn predicted_efficiency(nu: f64, k: usize, workers: usize, m: usize) -> f64 {
    1.0 - nu * k as f64 * (workers as f64 - 1.0) / (2.0 * m as f64)
}

fn check_counts(counts: &[usize]) -> Result<(), BenchError> {
    if counts.first() != Some(&1) || counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::WorkerCounts(counts.to_vec()));
    }
    Ok(())
}

fn point(workers: usize, n_rows: usize, n_cols: usize, report: &GreedyReport) -> ScalingPoint {
    let t = &report.timings;
    let steady = if t.len() > WARMUP { &t[WARMUP..] } else { &t[..] };
    let pivots: Vec<f64> = steady.iter().map(|x| x.pivot_plus_c).collect();
    let spread = match (pivots.iter().copied().reduce(f64::min), pivots.iter().copied().reduce(f64::max)) {
        (Some(lo), Some(hi)) if lo > 0.0 => hi / lo,
        _ => f64::NAN,
    };
    let (js, imgs): (Vec<f64>, Vec<f64>) =
        t.iter().enumerate().map(|(i, x)| ((i + 1) as f64, x.imgs)).filter(|(j, _)| *j >= FIT_FROM as f64).unzip();
    let identity = t
        .iter()
        .filter(|x| x.total > 0.0)
        .map(|x| (x.total - (x.pivot_plus_c + x.imgs)).abs() / x.total)
        .fold(0.0, f64::max);
    let k = report.pivots.len();
    ScalingPoint {
        workers,
        n_rows,
        n_cols,
        k,
        timings: t.clone(),
        median_pivot: median(&pivots),
        median_imgs: median(&steady.iter().map(|x| x.imgs).collect::<Vec<_>>()),
        median_total: median(&steady.iter().map(|x| x.total).collect::<Vec<_>>()),
        run_time: t.iter().map(|x| x.total).sum::<f64>() + report.final_search_time,
        mean_sweeps: report.mean_sweeps(),
        efficiency: 1.0,
        speedup: 1.0,
        predicted_efficiency: predicted_efficiency(report.mean_sweeps(), k, workers, n_cols),
        pivot_spread: spread,
        imgs_r_squared: r_squared(&js, &imgs),
        identity_max_rel: identity,
    }
}

/// Fixed matrix, growing worker count. The snapshots are handed back so a
/// caller can reuse them without keeping a second copy.
pub fn strong_scaling(
    snapshots: SnapshotMatrix,
    k: usize,
    worker_counts: &[usize],
) -> Result<(Scaling, SnapshotMatrix), BenchError> {
    check_counts(worker_counts)?;
    let (n, m) = (snapshots.n_rows(), snapshots.n_cols());
    let opts = GreedyOptions::new(BENCH_TAU, k.min(n).min(m).max(1));
    let mut snapshots = Some(snapshots);
    let mut reference: Option<(Vec<usize>, Matrix)> = None;
    let mut points: Vec<ScalingPoint> = Vec::new();
    for &c in worker_counts {
        let s = snapshots.take().expect("snapshots returned by the previous run");
        let (state, report) = greedy_build(s, &opts, &Threads::new(c), &WallClock::new())?;
        let (s, basis) = state.into_parts();
        snapshots = Some(s);
        match &reference {
            None => reference = Some((report.pivots.clone(), basis)),
            Some((p, q)) => {
                if *p != report.pivots {
                    return Err(BenchError::Nondeterministic { workers: c, what: "pivot sequence" });
                }
                if *q != basis {
                    return Err(BenchError::Nondeterministic { workers: c, what: "basis" });
                }
            }
        }
        let mut pt = point(c, n, m, &report);
        if let Some(base) = points.first() {
            pt.efficiency = base.median_pivot / (c as f64 * pt.median_pivot);
            pt.speedup = c as f64 * pt.efficiency;
        }
        points.push(pt);
    }
    Ok((Scaling { mode: Mode::Strong, points }, snapshots.unwrap()))
}

/// `cols_per_worker * C` random columns for `C` workers, `n` rows throughout.
pub fn weak_scaling(
    n: usize,
    cols_per_worker: usize,
    k: usize,
    worker_counts: &[usize],
    seed: u64,
) -> Result<Scaling, BenchError> {
    check_counts(worker_counts)?;
    let mut points: Vec<ScalingPoint> = Vec::new();
    for &c in worker_counts {
        let m = cols_per_worker * c;
        let s = SnapshotMatrix::new(gaussian_matrix(n, m, seed.wrapping_add(c as u64)))
            .map_err(|e| BenchError::Greedy(e.into()))?;
        let opts = GreedyOptions::new(BENCH_TAU, k.min(n).min(m).max(1));
        let (_, serial) = greedy_build(s.clone(), &opts, &Serial::default(), &NoClock)?;
        let (_, report) = greedy_build(s, &opts, &Threads::new(c), &WallClock::new())?;
        if serial.pivots != report.pivots {
            return Err(BenchError::Nondeterministic { workers: c, what: "pivot sequence" });
        }
        let mut pt = point(c, n, m, &report);
        if let Some(base) = points.first() {
            let per_iter = |p: &ScalingPoint| p.run_time / p.k.max(1) as f64;
            pt.efficiency = per_iter(base) / per_iter(&pt);
            pt.speedup = c as f64 * pt.efficiency;
        }
        points.push(pt);
    }
    Ok(Scaling { mode: Mode::Weak, points })
}

impl Scaling {
    /// One row per worker count and iteration: `C,j,t_pivot_c,t_imgs,t_total`.
    pub fn csv(&self) -> String {
        let mut out = String::from("C,j,t_pivot_c,t_imgs,t_total\n");
        for p in &self.points {
            for (j, t) in p.timings.iter().enumerate() {
                let _ = writeln!(out, "{},{},{:e},{:e},{:e}", p.workers, j + 1, t.pivot_plus_c, t.imgs, t.total);
            }
        }
        out
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&[
            "C", "N", "M", "k", "t_pivot_c", "t_imgs", "run_time", "E_C", "speedup", "E_pred", "spread", "R2_imgs",
        ]);
        for p in &self.points {
            t.row(vec![
                p.workers.to_string(),
                p.n_rows.to_string(),
                p.n_cols.to_string(),
                p.k.to_string(),
                format!("{:.3e}", p.median_pivot),
                format!("{:.3e}", p.median_imgs),
                format!("{:.3e}", p.run_time),
                format!("{:.3}", p.efficiency),
                format!("{:.2}", p.speedup),
                format!("{:.3}", p.predicted_efficiency),
                format!("{:.2}", p.pivot_spread),
                format!("{:.3}", p.imgs_r_squared),
            ]);
        }
        t
    }

    pub fn identity_max_rel(&self) -> f64 {
        self.points.iter().map(|p| p.identity_max_rel).fold(0.0, f64::max)
    }
}
