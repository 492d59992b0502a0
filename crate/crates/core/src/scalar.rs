//! Scalar abstraction shared by the numerical core.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating-point scalar usable by the grid, spectral and constants code.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// assume `f64`; `f32` is supported for throughput experiments.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Sum + Default + Display + LowerExp + Debug + Send + Sync + 'static
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Deterministic pairwise summation; the reduction tree depends only on the
/// slice length, never on the worker count.
pub fn pairwise_sum<T: Real>(values: &[T]) -> T {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        let mut acc = T::zero();
        for &v in values {
            acc = acc + v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Deterministic mapped reduction: fixed-size chunks are reduced in parallel and
/// the chunk partial sums are combined by [`pairwise_sum`].
pub fn tree_sum_map<T, F>(values: &[T], f: F) -> T
where
    T: Real,
    F: Fn(T) -> T + Sync,
{
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    let partials: Vec<T> = values
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mapped: Vec<T> = chunk.iter().map(|&v| f(v)).collect();
            pairwise_sum(&mapped)
        })
        .collect();
    pairwise_sum(&partials)
}

/// Deterministic sum of `f(i)` for `i in 0..len`, with the same tree shape as
/// [`tree_sum_map`].
pub fn tree_sum_by<T, F>(len: usize, f: F) -> T
where
    T: Real,
    F: Fn(usize) -> T + Sync,
{
    use rayon::prelude::*;
    const CHUNK: usize = 4096;
    let chunks = len.div_ceil(CHUNK);
    let partials: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let end = ((c + 1) * CHUNK).min(len);
            let mapped: Vec<T> = (c * CHUNK..end).map(&f).collect();
            pairwise_sum(&mapped)
        })
        .collect();
    pairwise_sum(&partials)
}
