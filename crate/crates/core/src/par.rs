//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) `Parallelism::Parallel` runs on
//! the rayon global pool; without it every call runs sequentially.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Parallel
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(mode: Parallelism, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// True when `pred` holds for every index in `0..n`.
pub fn all_indices<F>(mode: Parallelism, n: u64, pred: F) -> bool
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().all(pred);
    }
    let _ = mode;
    (0..n).all(pred)
}

/// Run `f` on a pool with `workers` threads (sequentially when 1 or when the
/// feature is off).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce(Parallelism) -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if workers > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(|| f(Parallelism::Parallel));
        }
    }
    let _ = workers;
    f(Parallelism::Sequential)
}
