//! Data-parallel helpers with a sequential fallback.
//!
//! Every hot loop in the crate goes through these functions. With the
//! `parallel` feature (default) and [`Exec::Parallel`] the work is handed to
//! rayon; otherwise the same closures run on the calling thread in index
//! order. Results are bit-identical between the two paths because every
//! reduction is performed row by row and combined sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution strategy for grid sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    #[default]
    Parallel,
}

impl Exec {
    /// `true` when work is actually dispatched to rayon.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Calls `f(row_index, row)` for each contiguous chunk of `row_len` values.
pub fn for_each_row_mut<F>(exec: Exec, data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(row_len > 0 && data.len() % row_len == 0);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
        return;
    }
    let _ = exec;
    data.chunks_mut(row_len)
        .enumerate()
        .for_each(|(i, row)| f(i, row));
}

/// Per-row reduction: returns `f(row_index)` for every row, in order.
pub fn map_rows<T, F>(exec: Exec, rows: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..rows).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..rows).map(f).collect()
}

/// Evaluates `f` at each index and collects the results in order.
pub fn map_indices<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_rows(exec, n, f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_rows_agree() {
        let mut a = vec![0.0; 64];
        let mut b = vec![0.0; 64];
        let fill = |i: usize, row: &mut [f64]| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (i * 8 + j) as f64 * 0.5;
            }
        };
        for_each_row_mut(Exec::Sequential, &mut a, 8, fill);
        for_each_row_mut(Exec::Parallel, &mut b, 8, fill);
        assert_eq!(a, b);
    }

    #[test]
    fn map_rows_preserves_order() {
        let v = map_rows(Exec::Parallel, 100, |i| i * i);
        assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
    }
}
