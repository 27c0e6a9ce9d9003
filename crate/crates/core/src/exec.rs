//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature the helpers dispatch to rayon; the runtime
//! switch lets benchmarks compare both paths inside one binary. Without the
//! feature everything runs on the calling thread.

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Below this many work items the sequential path is always taken.
const MIN_PARALLEL_LEN: usize = 1024;

/// Enables or disables the rayon path at runtime. No-op without the
/// `parallel` feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn parallel_enabled() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

fn use_parallel(work: usize) -> bool {
    parallel_enabled() && work >= MIN_PARALLEL_LEN
}

/// Builds `(0..n).map(f)` into a vector.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if use_parallel(n) {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = use_parallel;
    (0..n).map(f).collect()
}

/// Calls `f(chunk_index, chunk)` for each `chunk_len`-sized piece of `data`;
/// the first error (in chunk order) is returned.
pub(crate) fn try_for_each_chunk_mut<T, E, F>(data: &mut [T], chunk_len: usize, f: F) -> Result<(), E>
where
    T: Send,
    E: Send,
    F: Fn(usize, &mut [T]) -> Result<(), E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if use_parallel(data.len()) && data.len() > chunk_len {
        use rayon::prelude::*;
        let results: Vec<Result<(), E>> = data
            .par_chunks_mut(chunk_len)
            .enumerate()
            .map(|(i, c)| f(i, c))
            .collect();
        return results.into_iter().collect();
    }
    data.chunks_mut(chunk_len)
        .enumerate()
        .try_for_each(|(i, c)| f(i, c))
}

/// Runs two closures, concurrently when parallelism is enabled.
pub fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        return rayon::join(a, b);
    }
    (a(), b())
}

/// Maps independent jobs (scenario levels, control runs).
pub fn map_jobs<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    items.into_iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_indexed_preserves_order() {
        let v = map_indexed(5000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunks_see_their_index() {
        let mut data = vec![0usize; 4096];
        try_for_each_chunk_mut(&mut data, 64, |ci, c| {
            c.iter_mut().for_each(|x| *x = ci);
            Ok::<(), ()>(())
        })
        .unwrap();
        assert_eq!(data[0], 0);
        assert_eq!(data[64 * 10 + 3], 10);
        let err = try_for_each_chunk_mut(&mut data, 64, |ci, _| if ci >= 3 { Err(ci) } else { Ok(()) });
        assert_eq!(err, Err(3));
    }
}
