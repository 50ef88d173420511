//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the `Parallel` mode maps work
//! items on the rayon pool; without it every mode runs sequentially. Results
//! are always returned in index order, so aggregation downstream does not
//! depend on scheduling.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Evaluate `f(i)` for `i in 0..n`, collecting results in index order.
pub fn map_indices<T, F>(n: usize, mode: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Count the indices in `0..n` for which `pred` holds.
pub fn count_indices<F>(n: usize, mode: Execution, pred: F) -> usize
where
    F: Fn(usize) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if mode.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().filter(|&i| pred(i)).count();
        }
    }
    let _ = mode;
    (0..n).filter(|&i| pred(i)).count()
}

/// Run `f` inside a pool capped at `jobs` workers (`None` = global pool).
pub fn with_jobs<T: Send, F: FnOnce() -> T + Send>(jobs: Option<usize>, f: F) -> T {
    #[cfg(feature = "parallel")]
    {
        if let Some(j) = jobs {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build() {
                return pool.install(f);
            }
        }
    }
    let _ = jobs;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_indices(100, Execution::Sequential, |i| i * i);
        let b = map_indices(100, Execution::Parallel, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(count_indices(10, Execution::Parallel, |i| i % 2 == 0), 5);
    }
}
