//! Data-parallel helpers with a sequential fallback.

/// How to run an independent map.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    Parallel,
}

impl Default for Strategy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Strategy::Parallel
        } else {
            Strategy::Sequential
        }
    }
}

/// Order-preserving map.
pub fn par_map<T, R, F>(strategy: Strategy, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
        _ => items.iter().map(f).collect(),
    }
}

pub fn par_map_owned<T, R, F>(strategy: Strategy, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            items.into_par_iter().map(f).collect()
        }
        _ => items.into_iter().map(f).collect(),
    }
}
