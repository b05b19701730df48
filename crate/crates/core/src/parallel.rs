//! Thread-pool sizing. `BSS_THREADS` caps the worker count.

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "BSS_THREADS";

/// Worker count from `BSS_THREADS`, or `None` to let rayon decide.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Runs `f` inside a pool honouring [`thread_cap`].
pub fn install<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    let pool = POOL.get_or_init(|| {
        thread_cap().and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok())
    });
    match pool {
        Some(pool) => pool.install(f),
        None => f(),
    }
}
