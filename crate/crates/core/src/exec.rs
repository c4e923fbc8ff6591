//! Execution mode for the per-image loops inside the tensor kernels.
//!
//! Batch images are processed independently and per-image partial results
//! are always reduced in batch order, so results are bit-identical between
//! sequential and threaded execution. Sequential execution is the default.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

/// Environment variable read by [`init_from_env`].
pub const THREADS_ENV: &str = "ROCKSR_THREADS";

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Number of worker threads used by the kernels. `1` means sequential.
pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn is_sequential() -> bool {
    threads() == 1
}

/// Reads `ROCKSR_THREADS` (default 1). Returns the resolved thread count.
pub fn init_from_env() -> usize {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(1);
    set_threads(n);
    if n > 1 {
        // A global pool may already exist; that is fine.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    threads()
}

/// Maps `f` over `0..n`, in parallel when more than one thread is configured.
/// The output order is always `0..n`.
pub(crate) fn map_indices<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if is_sequential() || n < 2 {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}
