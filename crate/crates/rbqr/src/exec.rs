//! Scoped-thread executor and wall clock.

use std::time::Instant;

use rbqr_core::exec::{Clock, Executor};

/// Runs each work item on its own scoped thread. The calling thread takes
/// the first item, so `workers = 1` never spawns.
#[derive(Debug, Clone, Copy)]
pub struct Threads {
    workers: usize,
}

impl Threads {
    pub fn new(workers: usize) -> Self {
        Threads { workers: workers.max(1) }
    }
}

impl Executor for Threads {
    fn workers(&self) -> usize {
        self.workers
    }

    fn for_each_mut<T, F>(&self, items: &mut [T], f: F)
    where
        T: Send,
        F: Fn(&mut T) + Sync,
    {
        let Some((first, rest)) = items.split_first_mut() else {
            return;
        };
        if rest.is_empty() {
            f(first);
            return;
        }
        let f = &f;
        std::thread::scope(|s| {
            for item in rest {
                s.spawn(move || f(item));
            }
            f(first);
        });
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WallClock {
    origin: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        WallClock { origin: Instant::now() }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}
