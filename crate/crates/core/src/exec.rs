//! Index-ordered parallel map with an optional dedicated worker pool.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluates `f(0), ..., f(count - 1)` in parallel and returns the results in
/// index order. `workers = None` runs on the current rayon pool.
pub fn map_indexed<T, F>(workers: Option<usize>, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match workers {
        None => Ok((0..count).into_par_iter().map(&f).collect()),
        Some(0) => Err(Error::InvalidRequest("worker count must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidRequest(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
        }
    }
}

/// Runs `f` inside a pool of `workers` threads, or directly when `None`.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidRequest("worker count must be at least 1".into())),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::InvalidRequest(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
