//! Switch between data-parallel and sequential iteration.
//!
//! The default build fans independent per-item work out through rayon; with
//! `--no-default-features` the same helpers run as plain sequential loops,
//! so every caller compiles either way.

#[cfg(feature = "parallel")]
pub(crate) fn try_map_indexed<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn try_map_indexed<T, E, F>(count: usize, f: F) -> Result<Vec<T>, E>
where
    F: Fn(usize) -> Result<T, E>,
{
    (0..count).map(f).collect()
}

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}
