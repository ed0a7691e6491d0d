//! Sequential or data-parallel execution of independent work items.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] maps over a
//! rayon thread pool; without it, it silently runs sequentially. Results are
//! always returned in input order, so callers see identical output either way.

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this mode will actually use more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps fallible work and returns the error of the earliest failing item,
    /// so the reported failure does not depend on thread scheduling.
    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map(&xs, |x| x * x);
        let b = Execution::Parallel.map(&xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(a[999], 999 * 999);
    }

    #[test]
    fn earliest_error_wins() {
        let xs: Vec<u32> = (0..500).collect();
        let r: Result<Vec<u32>, u32> =
            Execution::Parallel.try_map(&xs, |&x| if x % 97 == 13 { Err(x) } else { Ok(x) });
        assert_eq!(r, Err(13));
    }
}
