//! Serial or data-parallel execution of independent indexed jobs.
//!
//! Results always come back in index order, so anything reduced from them is
//! independent of the worker count. Without the `parallel` feature every
//! policy runs serially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Serial,
    /// `workers = 0` uses the global pool.
    Parallel { workers: usize },
    #[default]
    Auto,
}

impl Execution {
    pub fn from_workers(workers: usize) -> Self {
        match workers {
            1 => Execution::Serial,
            w => Execution::Parallel { workers: w },
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && !matches!(self, Execution::Serial)
    }
}

pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        match exec {
            Execution::Serial => (0..n).map(f).collect(),
            Execution::Auto | Execution::Parallel { workers: 0 } => (0..n).into_par_iter().map(f).collect(),
            Execution::Parallel { workers } => match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                Ok(pool) => pool.install(|| (0..n).into_par_iter().map(&f).collect()),
                Err(e) => {
                    log::warn!("could not build a {workers}-thread pool ({e}); running serially");
                    (0..n).map(f).collect()
                }
            },
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = exec;
        (0..n).map(f).collect()
    }
}
