//! Thin layer over rayon so the rest of the crate compiles with or without
//! the `parallel` feature. Sequential fallbacks preserve iteration order, and
//! every parallel construct used here produces results that do not depend on
//! the number of threads.

/// Runs `f` with exactly `workers` threads (0 = the enclosing pool).
/// Pools are built once per size and reused.
#[cfg(feature = "parallel")]
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};

    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<rayon::ThreadPool>>>> = OnceLock::new();
    if workers == 0 || workers == rayon::current_num_threads() {
        return f();
    }
    let pool = {
        let mut pools = POOLS
            .get_or_init(Default::default)
            .lock()
            .unwrap_or_else(|e| e.into_inner());
        match pools.get(&workers) {
            Some(p) => Some(p.clone()),
            None => {
                match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                    Ok(p) => {
                        let p = Arc::new(p);
                        pools.insert(workers, p.clone());
                        Some(p)
                    }
                    Err(err) => {
                        log::warn!("could not build a {workers}-thread pool ({err}); using the current pool");
                        None
                    }
                }
            }
        }
    };
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<R: Send>(_workers: usize, f: impl FnOnce() -> R + Send) -> R {
    f()
}

/// Number of threads available to the current parallel scope.
pub fn current_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[inline]
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

/// Calls `f(index, chunk, scratch)` for every `chunk_len` chunk of `data`.
/// `init` builds per-worker scratch space.
pub fn for_each_chunk_mut<T, S, I, F>(data: &mut [T], chunk_len: usize, init: I, f: F)
where
    T: Send,
    I: Fn() -> S + Send + Sync,
    F: Fn(usize, &mut [T], &mut S) + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each_init(init, |scratch, (i, chunk)| f(i, chunk, scratch));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = init();
        for (i, chunk) in data.chunks_mut(chunk_len).enumerate() {
            f(i, chunk, &mut scratch);
        }
    }
}

/// Maps `f` over `items` and collects results in input order.
pub fn map_collect<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
