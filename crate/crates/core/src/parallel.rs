//! Order-preserving indexed map, data-parallel when the `parallel` feature is on.
//!
//! Every work item derives its own random stream from its index, so the
//! output is identical for any worker count and for the sequential build.

/// Sequential reference path; always available.
pub fn map_indexed_sequential<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// `workers == 1` runs on the calling thread; `0` uses rayon's default pool.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    if workers == 1 || len <= 1 {
        return map_indexed_sequential(len, f);
    }
    let run = || (0..len).into_par_iter().map(&f).collect();
    if workers == 0 {
        return run();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, _workers: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    map_indexed_sequential(len, f)
}
