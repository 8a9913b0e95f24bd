//! Execution strategy for the data-parallel kernels.
//!
//! Every hot loop in the crate is a max-reduction or an index-ordered map, so
//! results are independent of evaluation order. With the `parallel` feature
//! (default) `Parallelism::Auto` runs on rayon; without it, or with
//! `Parallelism::Sequential`, the same kernel runs as a plain iterator.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    #[default]
    Auto,
    Sequential,
}

/// Map each item to a nonnegative score and return the maximum (0 for empty).
pub fn map_max<T: Sync, F: Fn(&T) -> f64 + Sync>(items: &[T], f: F, par: Parallelism) -> f64 {
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Auto => items.par_iter().map(&f).fold(|| 0.0f64, f64::max).reduce(|| 0.0, f64::max),
        _ => map_max_seq(items, f),
    }
}

/// Sequential twin of [`map_max`]; kept public so benches can compare routes.
pub fn map_max_seq<T, F: Fn(&T) -> f64>(items: &[T], f: F) -> f64 {
    items.iter().map(f).fold(0.0f64, f64::max)
}

/// Index-ordered parallel map: output[i] = f(&items[i]).
pub fn map_collect<T: Sync, R: Send, F: Fn(&T) -> R + Sync>(
    items: &[T],
    f: F,
    par: Parallelism,
) -> Vec<R> {
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Auto => items.par_iter().map(&f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Map over 0..n preserving index order.
pub fn map_range<R: Send, F: Fn(usize) -> R + Sync>(n: usize, f: F, par: Parallelism) -> Vec<R> {
    match par {
        #[cfg(feature = "parallel")]
        Parallelism::Auto => (0..n).into_par_iter().map(&f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_reduction_is_route_independent() {
        let v: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64).collect();
        let a = map_max(&v, |x| *x, Parallelism::Auto);
        let b = map_max_seq(&v, |x| *x);
        assert_eq!(a, b);
    }

    #[test]
    fn collect_preserves_order() {
        let v = map_range(10, |i| i * i, Parallelism::Auto);
        assert_eq!(v, (0..10).map(|i| i * i).collect::<Vec<_>>());
    }
}
