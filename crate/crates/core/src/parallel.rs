//! Trial-level data parallelism with schedule-independent results.
//!
//! Trials are grouped into fixed-size blocks whose boundaries depend only on
//! the trial count. Block results come back in block order, so any reduction
//! performed over them is bit-identical for every worker count.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

/// Trials per work block.
pub const BLOCK: u64 = 4096;

/// A worker pool of a fixed size.
pub struct Executor {
    pool: ThreadPool,
    workers: usize,
}

impl Executor {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool");
        Self { pool, workers }
    }

    /// One worker per available core.
    pub fn available() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Maps `f` over trial blocks `[start, end)` covering `start..start+count`
    /// and returns the block results in order.
    pub fn blocks<T, F>(&self, start: u64, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64, u64) -> T + Sync + Send,
    {
        let n_blocks = count.div_ceil(BLOCK);
        self.pool.install(|| {
            (0..n_blocks)
                .into_par_iter()
                .map(|b| {
                    let lo = start + b * BLOCK;
                    let hi = (lo + BLOCK).min(start + count);
                    f(lo, hi)
                })
                .collect()
        })
    }

    /// Per-trial results in trial order.
    pub fn map_trials<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.blocks(0, count, |lo, hi| (lo..hi).map(&f).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect()
    }

    /// Number of trials in `start..start+count` for which `pred` holds.
    pub fn count_trials<F>(&self, start: u64, count: u64, pred: F) -> u64
    where
        F: Fn(u64) -> bool + Sync + Send,
    {
        self.blocks(start, count, |lo, hi| (lo..hi).filter(|&t| pred(t)).count() as u64)
            .into_iter()
            .sum()
    }

    /// Runs `f` on `items` in parallel, preserving order.
    pub fn map_items<I, T, F>(&self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        self.pool.install(|| items.par_iter().map(f).collect())
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::available()
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_worker_independent() {
        let pred = |t: u64| t.wrapping_mul(0x9e37_79b9_7f4a_7c15) % 7 == 0;
        let one = Executor::new(1).count_trials(3, 20_000, pred);
        let many = Executor::new(8).count_trials(3, 20_000, pred);
        assert_eq!(one, many);
        assert_eq!(one, (3..20_003).filter(|&t| pred(t)).count() as u64);
    }

    #[test]
    fn map_preserves_trial_order() {
        let v = Executor::new(4).map_trials(10_000, |t| t * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i as u64));
    }
}
