//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All learners and encoders are written against [`Scalar`] so the same code
//! runs in `f64` (the default used by the command-line pipeline) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar usable by the learners.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    #[inline]
    fn c(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar type")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Lossless (for f64) or widening conversion used by reports.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + Default
        + Sum
        + Send
        + Sync
        + Serialize
        + DeserializeOwned
        + 'static
{
}

/// Squared Euclidean distance between two equal-length slices.
#[inline]
pub fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    // four independent lanes let the compiler vectorize the loop
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            let d = x[l] - y[l];
            acc[l] = acc[l] + d * d;
        }
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        let d = x - y;
        tail = tail + d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Exponents below this give `exp(x) == 0` exactly.
pub(crate) fn exp_underflow<T: Scalar>() -> T {
    (T::min_positive_value() * T::epsilon()).ln() - T::one()
}

/// Index of the largest element, ties resolved toward the lowest index.
///
/// NaN entries never win.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = k;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.2_f64, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.0_f64, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[f64::NAN, 0.1, 0.0]), 1);
    }

    #[test]
    fn squared_distance_matches_hand_value() {
        assert_eq!(squared_distance(&[0.0_f32, 3.0], &[4.0, 0.0]), 25.0);
    }
}
