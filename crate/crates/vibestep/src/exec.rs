//! Parallel execution helpers.
//!
//! Data-parallel stages (trace synthesis, per-trace feature extraction)
//! run through [`par_map`]/[`try_par_map`]. With the `parallel` feature
//! enabled these fan out over a rayon pool; without it they degrade to
//! plain sequential loops. Both paths return results in input order, so
//! switching the feature never changes any output.

use crate::error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "VIBESTEP_THREADS";

/// Parse the thread cap from the environment. Unset means "no cap";
/// anything set must be a positive integer.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidParameter {
                name: THREADS_ENV,
                reason: format!("must be a positive integer, got {raw:?}"),
            }),
        },
    }
}

#[cfg(feature = "parallel")]
static POOL_INIT: std::sync::OnceLock<()> = std::sync::OnceLock::new();

/// Apply the environment thread cap to the global worker pool. Call
/// once at startup, before any parallel work; later calls are no-ops.
#[cfg(feature = "parallel")]
pub fn init_parallelism() -> Result<()> {
    let cap = thread_cap()?;
    if let Some(n) = cap {
        if POOL_INIT.set(()).is_ok() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidParameter {
                    name: THREADS_ENV,
                    reason: format!("could not apply thread cap: {e}"),
                })?;
        }
    }
    Ok(())
}

/// Sequential build: the cap is still validated, then ignored.
#[cfg(not(feature = "parallel"))]
pub fn init_parallelism() -> Result<()> {
    thread_cap().map(|_| ())
}

/// Map `f` over `items`, in parallel when the `parallel` feature is on.
/// The output order always matches the input order.
pub fn par_map<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Fallible [`par_map`]: stops at (one of) the first failures and
/// returns it; on success the output order matches the input order.
pub fn try_par_map<T, U, F>(items: Vec<T>, f: F) -> Result<Vec<U>>
where
    T: Send,
    U: Send,
    F: Fn(T) -> Result<U> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let out = par_map((0..1000).collect::<Vec<i64>>(), |i| i * i);
        assert_eq!(out, (0..1000).map(|i| i * i).collect::<Vec<i64>>());
    }

    #[test]
    fn try_par_map_propagates_errors() {
        let ok = try_par_map(vec![1.0, 2.0, 3.0], |x| Ok::<f64, Error>(x + 1.0)).unwrap();
        assert_eq!(ok, vec![2.0, 3.0, 4.0]);
        let err = try_par_map(vec![1.0, -1.0, 3.0], |x| {
            if x < 0.0 {
                Err(Error::NonFiniteInput)
            } else {
                Ok(x)
            }
        });
        assert!(matches!(err, Err(Error::NonFiniteInput)));
    }
}
