//! Execution and timing hooks.
//!
//! The core never spawns threads or reads a clock. Callers supply an
//! [`Executor`] that runs a closure over disjoint work items and a [`Clock`]
//! for per-iteration timers; the std companion crate provides threaded and
//! wall-clock implementations.

use alloc::vec::Vec;
use core::ops::Range;

/// Runs a closure over every item of a slice, possibly concurrently.
///
/// Implementations must call `f` exactly once per item. Items are disjoint,
/// so results cannot depend on scheduling.
pub trait Executor: Sync {
    /// Number of workers the column space is split across.
    fn workers(&self) -> usize;

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(&mut T) + Sync;
}

/// Runs everything on the calling thread, but still partitions work as if
/// `workers` searchers were present.
#[derive(Debug, Clone, Copy)]
pub struct Serial {
    pub workers: usize,
}

impl Default for Serial {
    fn default() -> Self {
        Serial { workers: 1 }
    }
}

impl Executor for Serial {
    fn workers(&self) -> usize {
        self.workers.max(1)
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(&mut T) + Sync,
    {
        items.iter_mut().for_each(f);
    }
}

/// Seconds since an arbitrary origin.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that never advances; all timers read zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

/// Splits `0..len` into `parts` contiguous ranges whose sizes differ by at
/// most one. Empty ranges are dropped, so fewer than `parts` may be returned.
pub fn partition(len: usize, parts: usize) -> Vec<Range<usize>> {
    let parts = parts.max(1).min(len.max(1));
    let base = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for p in 0..parts {
        let size = base + usize::from(p < extra);
        if size > 0 {
            out.push(start..start + size);
        }
        start += size;
    }
    out
}

/// Splits a mutable slice along the given contiguous ranges, which must
/// cover `0..slice.len()` in order.
pub(crate) fn split_by_ranges<'a, T>(mut slice: &'a mut [T], ranges: &[Range<usize>]) -> Vec<&'a mut [T]> {
    let mut out = Vec::with_capacity(ranges.len());
    for r in ranges {
        let (head, tail) = core::mem::take(&mut slice).split_at_mut(r.len());
        out.push(head);
        slice = tail;
    }
    out
}
