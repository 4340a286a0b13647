//! Data-parallel maps over independent work items.
//!
//! With the `parallel` feature (the default) [`map`] and [`try_map`]
//! dispatch to rayon; without it they run sequentially. The explicit
//! [`map_seq`] and [`map_par`] variants exist for benchmarks and for callers
//! that need a fixed evaluation order.

use crate::error::Result;

pub fn map_seq<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    F: Fn(&I) -> T,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_par<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_par(items, f)
}

#[cfg(not(feature = "parallel"))]
pub fn map<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    map_seq(items, f)
}

/// Like [`map`], returning the first error in item order.
pub fn try_map<I, T, F>(items: &[I], f: F) -> Result<Vec<T>>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Result<T> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

/// Whether [`map`] runs on the rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
