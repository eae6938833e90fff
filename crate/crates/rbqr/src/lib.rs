//! Std companion to `rbqr-core`: scoped-thread pivot search, wall-clock
//! timers, npy and text files, run configuration, the scaling harness and
//! the `rbqr` command line.

pub mod bench;
pub mod cli;
pub mod config;
pub mod exec;
pub mod files;
pub mod npy;
pub mod random;
pub mod report;

pub use rbqr_core as core;

use rbqr_core::greedy::{GreedyError, GreedyOptions, GreedyReport, GreedyState};
use rbqr_core::matrix::SnapshotMatrix;

/// Greedy run on `workers` threads with wall-clock timings.
pub fn greedy_build(
    snapshots: SnapshotMatrix,
    tau: f64,
    k_max: usize,
    workers: usize,
) -> Result<(GreedyState, GreedyReport), GreedyError> {
    rbqr_core::greedy::greedy_build(
        snapshots,
        &GreedyOptions::new(tau, k_max),
        &exec::Threads::new(workers),
        &exec::WallClock::new(),
    )
}
