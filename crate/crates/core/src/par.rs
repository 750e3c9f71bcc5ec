//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions are split into fixed-size blocks whose partial sums are combined
//! in block order, so results are bitwise identical for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const BLOCK: usize = 4096;

/// Sum `f(i)` over `0..n` with a thread-count independent summation order.
pub fn sum_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let blocks = n.div_ceil(BLOCK);
    let partial = |b: usize| {
        let lo = b * BLOCK;
        let hi = (lo + BLOCK).min(n);
        (lo..hi).map(&f).sum::<f64>()
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = (0..blocks).into_par_iter().map(partial).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = (0..blocks).map(partial).collect();
    parts.iter().sum()
}

/// Maximum of `f(i)` over `0..n`; 0 for an empty range.
pub fn max_by<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).reduce(|| 0.0, f64::max)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(0.0, f64::max)
    }
}

/// Fill `out` slab by slab; `f(k, slab)` receives the slab index and its storage.
pub fn for_each_slab<F>(out: &mut [f64], slab: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if slab == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    out.par_chunks_mut(slab)
        .enumerate()
        .for_each(|(k, s)| f(k, s));
    #[cfg(not(feature = "parallel"))]
    out.chunks_mut(slab).enumerate().for_each(|(k, s)| f(k, s));
}

/// Element-wise update `out[i] = f(i, out[i])`.
pub fn update<F>(out: &mut [f64], f: F)
where
    F: Fn(usize, f64) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    out.par_iter_mut()
        .enumerate()
        .for_each(|(i, v)| *v = f(i, *v));
    #[cfg(not(feature = "parallel"))]
    out.iter_mut().enumerate().for_each(|(i, v)| *v = f(i, *v));
}

/// Map a list of independent jobs, preserving input order in the output.
pub fn map_jobs<T, R, F>(jobs: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
