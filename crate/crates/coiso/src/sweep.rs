//! Point sweeps. Results always come back ordered by point index, so the
//! parallel and sequential paths produce identical output.

use std::sync::atomic::{AtomicBool, Ordering};

use crate::Result;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enables or disables the data-parallel path at runtime. Has no effect
/// when the crate is built without the `parallel` feature.
pub fn set_parallel(on: bool) {
    PARALLEL.store(on && cfg!(feature = "parallel"), Ordering::SeqCst);
}

pub fn is_parallel() -> bool {
    PARALLEL.load(Ordering::SeqCst)
}

pub fn map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Like [`map`], but fails with the error of the lowest failing index.
pub fn try_map<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map(n, f).into_iter().collect()
}
