//! Deterministic fan-out over independent work chunks.
//!
//! Work is split into a fixed number of chunks whose results are returned in
//! chunk order, so the merged output does not depend on the thread count or on
//! whether the `parallel` feature is enabled.

/// Evaluates `f` on every chunk index in `0..n_chunks` and returns the results
/// in index order.
#[cfg(feature = "parallel")]
pub fn map_chunks<T, F>(n_chunks: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_chunks).into_par_iter().map(f).collect()
}

/// Evaluates `f` on every chunk index in `0..n_chunks` and returns the results
/// in index order.
#[cfg(not(feature = "parallel"))]
pub fn map_chunks<T, F>(n_chunks: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..n_chunks).map(f).collect()
}

/// Evaluates `f` on every item in order, in parallel when available.
#[cfg(feature = "parallel")]
pub fn map_items<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Evaluates `f` on every item in order, in parallel when available.
#[cfg(not(feature = "parallel"))]
pub fn map_items<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Default number of paths per chunk for Monte Carlo loops.
pub const CHUNK: u64 = 2048;

/// Splits `n` items into chunks of at most [`CHUNK`] and returns
/// `(chunk_count, range_of(chunk))`.
pub fn chunk_ranges(n: u64) -> Vec<std::ops::Range<u64>> {
    let mut out = Vec::with_capacity(n.div_ceil(CHUNK) as usize);
    let mut lo = 0;
    while lo < n {
        let hi = (lo + CHUNK).min(n);
        out.push(lo..hi);
        lo = hi;
    }
    out
}

/// Runs `f` on each chunk range of `0..n` and returns the per-chunk results
/// in order.
pub fn map_ranges<T, F>(n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(n);
    map_items(&ranges, |r| f(r.clone()))
}

/// Configures the global worker pool. Has no effect without the `parallel`
/// feature or when the pool was already built.
pub fn set_jobs(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
    }
}
