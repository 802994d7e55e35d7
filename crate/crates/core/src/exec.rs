//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature off every mode runs sequentially. Results are
//! always collected in input order, so both modes produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Mode actually used given the compiled features.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    pub(crate) fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self.effective() {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            _ => (0..n).map(f).collect(),
        }
    }

    pub(crate) fn map_slice<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self.effective() {
            #[cfg(feature = "parallel")]
            Execution::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let a = Execution::Sequential.map_range(1000, |i| i * i);
        let b = Execution::Parallel.map_range(1000, |i| i * i);
        assert_eq!(a, b);
        let items: Vec<u32> = (0..257).collect();
        assert_eq!(
            Execution::Parallel.map_slice(&items, |v| v + 1),
            Execution::Sequential.map_slice(&items, |v| v + 1)
        );
    }
}
