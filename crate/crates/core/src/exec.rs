//! Sequential or data-parallel execution of independent work items.
//!
//! Results never depend on the mode: every helper preserves input order.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Rayon work stealing on the current pool. Falls back to sequential
    /// execution when the crate is built without the `parallel` feature.
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether items will actually run on several threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// `f` applied to `0..n`, collected in index order.
pub fn map_indices<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// `f` applied to each element of `out` alongside its index.
pub fn fill_indexed<T, F>(mode: ExecMode, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        out.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
        return;
    }
    let _ = mode;
    out.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
}

/// Cap the global worker pool at `threads`. Only the first call in a process
/// takes effect; later calls and builds without `parallel` are no-ops.
pub fn init_thread_pool(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
}

/// Thread cap from `EDGEBENCH_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("EDGEBENCH_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}
