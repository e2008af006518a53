//! Scalar abstraction for the numeric kernels.
//!
//! The ensemble arithmetic, robust aggregation and privacy mechanisms are
//! written against [`Real`] so they run on `f32` or `f64`. The simulator
//! itself is instantiated with `f64` (see the aliases at the crate root).

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the numeric kernels.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Total order over a scalar slice, treating NaN as equal (callers reject
/// non-finite input before sorting).
pub(crate) fn sort_reals<T: Real>(values: &mut [T]) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_roundtrip() {
        assert_eq!(f32::lit(0.5), 0.5f32);
        assert_eq!(f64::from_count(7), 7.0);
        assert_eq!(2.5f32.as_f64(), 2.5);
    }
}
