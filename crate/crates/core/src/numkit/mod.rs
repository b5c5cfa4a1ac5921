//! Dense arithmetic, matrices and seeded random streams.

mod matrix;
mod rng;

use std::ops::Range;

use rayon::prelude::*;

pub use matrix::Matrix;
pub(crate) use matrix::{gemm, MatRef};
pub use rng::{sample_matrix, seed_stream, BaseDistribution, RngStream};

/// Complex scalar used for characteristic-function values.
pub type ComplexValue = num_complex::Complex64;

/// Rows per block in blocked reductions.
pub const BLOCK_ROWS: usize = 256;

/// Splits `0..n` into consecutive ranges of at most `size`.
pub(crate) fn block_ranges(n: usize, size: usize) -> Vec<Range<usize>> {
    let size = size.max(1);
    (0..n.div_ceil(size))
        .map(|b| b * size..((b + 1) * size).min(n))
        .collect()
}

/// Maps `f` over fixed blocks of `0..n` in parallel, returning results in
/// block order. The partition does not depend on the thread count, so any
/// in-order fold of the output is bit-reproducible.
pub(crate) fn par_blocks<T, F>(n: usize, size: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    block_ranges(n, size).into_par_iter().map(f).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_cover_range() {
        let r = block_ranges(10, 4);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert!(block_ranges(0, 4).is_empty());
    }
}
