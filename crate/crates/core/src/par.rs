//! Job-level parallelism for Monte Carlo studies.
//!
//! Every job owns its random stream, so results do not depend on the
//! execution mode or on the number of worker threads.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    /// Rayon work stealing; falls back to sequential without the `parallel` feature.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    pub fn is_parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Applies `f` to every item and returns the results in input order.
pub fn map_jobs<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

/// Fallible variant of [`map_jobs`]; returns the first error in input order.
pub fn try_map_jobs<T, R, E, F>(exec: Execution, items: &[T], f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync + Send,
{
    map_jobs(exec, items, f).into_iter().collect()
}

/// Installs a global worker pool of `threads` threads. Only the first call
/// in a process takes effect.
#[cfg(feature = "parallel")]
pub fn init_thread_pool(threads: usize) -> Result<(), rayon::ThreadPoolBuildError> {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..200).collect();
        let sq = |v: &u64| v * v;
        let a = map_jobs(Execution::Parallel, &items, sq);
        let b = map_jobs(Execution::Sequential, &items, sq);
        assert_eq!(a, b);
        assert_eq!(a[13], 169);
    }

    #[test]
    fn first_error_wins() {
        let items = [1, 2, 3, 4];
        let r: Result<Vec<i32>, i32> =
            try_map_jobs(Execution::Parallel, &items, |&v| if v >= 3 { Err(v) } else { Ok(v) });
        assert_eq!(r, Err(3));
    }
}
