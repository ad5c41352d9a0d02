//! Data-parallel helpers with a sequential fallback.
//!
//! Work is always split into the same chunks regardless of the execution
//! mode, and results come back in input order. Reductions performed by the
//! caller over the returned vector are therefore bitwise identical between
//! sequential and parallel runs.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    /// True when work will actually be dispatched to the rayon pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<I, R, F>(items: &[I], mode: Parallelism, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect();
    }
    let _ = mode;
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Maps `f` over fixed-size chunks of `items`, preserving chunk order.
pub fn map_chunks<I, R, F>(items: &[I], chunk: usize, mode: Parallelism, f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &[I]) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let chunks: Vec<&[I]> = items.chunks(chunk).collect();
    map(&chunks, mode, |i, c| f(i, c))
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, mode: Parallelism, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    map(&idx, mode, |_, &i| f(i))
}
