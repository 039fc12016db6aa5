//! Execution policy for the data-parallel loops (filtered basis columns,
//! tensor slices, calibration sweeps).
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon pool. Without it every policy degrades to the sequential path.
//! Results are collected in index order so both paths produce bit-identical
//! output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this policy actually fans out in the current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..len`, returning results in index order.
    pub fn map<T, F>(self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return (0..len).into_par_iter().map(f).collect();
        }
        (0..len).map(f).collect()
    }

    /// Maps `f` over a slice of inputs, returning results in input order.
    pub fn map_slice<I, T, F>(self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync + Send,
    {
        self.map(items.len(), |i| f(&items[i]))
    }
}
