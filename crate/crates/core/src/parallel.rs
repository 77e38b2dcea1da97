//! Worker pools.

use rayon::ThreadPoolBuilder;

/// Environment variable that overrides any explicit worker count.
pub const WORKERS_ENV: &str = "HANKEL_LES_WORKERS";

/// Resolve the worker count: the environment override wins, then the
/// requested value, then rayon's default.
pub fn resolve_workers(requested: Option<usize>) -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .or(requested)
}

/// Run `f` on a dedicated pool of `workers` threads (`None` uses the rayon
/// default). All parallel reductions in this crate are order-independent, so
/// the result does not depend on `workers`.
pub fn with_workers<T, F>(workers: Option<usize>, f: F) -> T
where
    F: FnOnce() -> T + Send,
    T: Send,
{
    let mut builder = ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    match builder.build() {
        Ok(pool) => pool.install(f),
        // Pool construction only fails on thread spawn errors; fall back to
        // the global pool.
        Err(_) => f(),
    }
}
