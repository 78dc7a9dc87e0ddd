//! Thread-pool executor for the path loop.

use rayon::prelude::*;
use roughmd_core::simulation::Executor;

/// Worker-count cap; `0` or unset means one worker per core.
pub const THREADS_ENV: &str = "ROUGHMD_THREADS";

/// Runs work units on a dedicated rayon pool. The unit partition is fixed
/// by the core, so results do not depend on the pool size.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()?;
        Ok(Self { pool })
    }

    pub fn from_env() -> Result<Self, String> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))?,
            Err(_) => 0,
        };
        Self::new(threads).map_err(|e| e.to_string())
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map_chunks<T, F>(&self, n_chunks: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool
            .install(|| (0..n_chunks).into_par_iter().map(&task).collect())
    }
}
