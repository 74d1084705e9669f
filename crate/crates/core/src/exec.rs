//! Sequential / data-parallel execution switch.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] fans work
//! out over the rayon global pool. Without it every mode runs sequentially.
//! Results are collected in input order either way, so outputs never depend
//! on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over `lo..hi` and keeps the item that is greatest under
    /// `better`. `better` must be a total order so the result does not
    /// depend on reduction order.
    pub fn max_by_range<R, F, B>(self, lo: u64, hi: u64, f: F, better: B) -> Option<R>
    where
        R: Send,
        F: Fn(u64) -> R + Sync + Send,
        B: Fn(&R, &R) -> std::cmp::Ordering + Sync + Send,
    {
        let pick = |a: R, b: R| {
            if better(&b, &a) == std::cmp::Ordering::Greater {
                b
            } else {
                a
            }
        };
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (lo..hi).into_par_iter().map(f).reduce_with(pick);
        }
        (lo..hi).map(f).reduce(pick)
    }
}
