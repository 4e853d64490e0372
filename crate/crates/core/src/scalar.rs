//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, NumCast, ToPrimitive};

/// Real scalar the geometry is computed over: `f32`, `f64`, or an extended
/// precision type such as a double-double.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Goes through `NumCast`, since the default
    /// `FromPrimitive::from_f64` truncates to an integer for types that only
    /// implement the integer conversions.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("f64 literal not representable")
    }

    /// Relative precision used in convergence tests. Double-double types
    /// report the smallest positive normal as their `epsilon`, so the value is
    /// floored at `1e-30`.
    #[inline]
    fn unit_roundoff() -> Self {
        Self::epsilon().max(Self::lit(1e-30))
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize not representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + ToPrimitive
        + Debug
        + Display
        + AddAssign
        + SubAssign
        + MulAssign
        + DivAssign
        + Send
        + Sync
        + 'static
{
}

pub(crate) fn to_f64_vec<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|c| c.to_f64_lossy()).collect()
}
