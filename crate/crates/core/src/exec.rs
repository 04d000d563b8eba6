//! Execution policy for the data-parallel kernels.
//!
//! Every hot loop in the crate (per-bin gain integration, the DOA grid
//! search, per-direction scene synthesis, manifest rows) goes through
//! [`Execution::map`]. With the `parallel` feature enabled the
//! [`Execution::Parallel`] policy fans out over the rayon pool; without it,
//! or with [`Execution::Sequential`], the same closure runs in a plain loop.
//! Results are always returned in index order, so output does not depend on
//! the policy or on the thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread over threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Evaluates `f(0), .., f(n - 1)` and collects the results in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Like [`Execution::map`] over the elements of a slice.
    pub fn map_slice<'a, S, T, F>(self, items: &'a [S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&'a S) -> T + Sync + Send,
    {
        self.map(items.len(), |i| f(&items[i]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree_and_preserve_order() {
        let f = |i: usize| (i * i) as f64 / 3.0;
        let seq = Execution::Sequential.map(1000, f);
        let par = Execution::Parallel.map(1000, f);
        assert_eq!(seq, par);
        assert_eq!(seq[10], 100.0 / 3.0);
    }

    #[test]
    fn empty_input() {
        assert!(Execution::Parallel.map(0, |i| i).is_empty());
    }
}
