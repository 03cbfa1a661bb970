//! Scalar abstraction.
//!
//! Every continuous quantity in this crate — milliseconds, bits per
//! second, warp distances — is generic over a floating-point scalar so
//! the whole pipeline runs in either `f32` or `f64`. Discrete quantities
//! (bytes, packet counts, probe indices) stay integral. The crate root
//! exports `f64` aliases for the common case.

use core::fmt::{Debug, Display};
use core::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar for times, rates, and distances.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Convert a finite `f64` (rounding if the target is narrower).
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 converts to any Scalar")
    }

    /// Convert a sequence index.
    fn from_index(i: usize) -> Self {
        Self::from_usize(i).expect("index converts to any Scalar")
    }

    /// Convert an exact byte or bit count (rounding if the target is
    /// narrower than the count).
    fn from_count(c: u64) -> Self {
        Self::from_u64(c).expect("count converts to any Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conversions_are_exact_for_small_values() {
        assert_eq!(f64::from_index(15_000), 15_000.0);
        assert_eq!(f32::from_count(12_000), 12_000.0_f32);
        assert_eq!(f64::from_f64_lossy(2.5), 2.5);
    }
}
