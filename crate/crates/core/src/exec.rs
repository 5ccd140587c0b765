//! Data-parallel evaluation over grid points.
//!
//! With the `parallel` feature (default) [`Exec::Parallel`] dispatches to
//! rayon; without it every strategy runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

impl Exec {
    pub fn map<T, U, F>(self, items: &[U], f: F) -> Vec<T>
    where
        T: Send,
        U: Sync,
        F: Fn(&U) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Exec::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fallible map; the first error in index order is returned.
    pub fn try_map<T, U, E, F>(self, items: &[U], f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        U: Sync,
        E: Send,
        F: Fn(&U) -> Result<T, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

/// Maximum of a sequence, ignoring nothing: NaN propagates.
pub fn sup<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().fold(0.0, |acc, v| {
        if v.is_nan() || acc.is_nan() {
            f64::NAN
        } else {
            acc.max(v)
        }
    })
}
