//! Data-parallel map over record batches.
//!
//! With the `parallel` feature the closure runs on the rayon pool; without
//! it the exact same call sites degrade to a sequential loop. Output order
//! always matches input order, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    map_slice_sequential(items, f)
}

/// Sequential reference path; the criterion bench compares this against
/// [`map_slice`].
pub fn map_slice_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}
