//! Worker-pool sizing for the embarrassingly parallel Monte Carlo paths.
//!
//! `HAZARDFORGE_THREADS` caps the number of worker threads; outputs are
//! bitwise-deterministic regardless of the cap because every parallel loop
//! seeds its chunks independently and reduces in chunk order.

use rayon::ThreadPool;
use std::sync::OnceLock;

static POOL: OnceLock<ThreadPool> = OnceLock::new();

/// The shared thread pool, sized from `HAZARDFORGE_THREADS` (>= 1) when set.
pub fn pool() -> &'static ThreadPool {
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Ok(value) = std::env::var("HAZARDFORGE_THREADS") {
            if let Ok(n) = value.trim().parse::<usize>() {
                builder = builder.num_threads(n.max(1));
            }
        }
        builder.build().expect("thread pool construction cannot fail")
    })
}
