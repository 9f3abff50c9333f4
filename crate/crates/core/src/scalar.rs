//! Scalar abstraction shared by every numeric kernel in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating point scalar: `f32` or `f64`.
///
/// All group, retraction, residual and solver code is written against this
/// trait. Tolerances quoted throughout the documentation assume `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + nalgebra::Scalar
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal is representable")
    }

    /// Converts an index or count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count is representable")
    }

    /// Lossy conversion to `f64`, used for reporting only.
    #[inline]
    fn as_f64(self) -> f64 {
        <Self as num_traits::ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Default central-difference step for first derivatives of smooth
    /// functions: `eps^(1/3) * max(1, |x|)`.
    #[inline]
    fn fd_step(x: Self) -> Self {
        Self::epsilon().cbrt() * Self::one().max(x.abs())
    }
}

impl Real for f32 {}
impl Real for f64 {}
