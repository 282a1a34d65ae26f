//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// The routines only need ordered field arithmetic plus the elementary
/// transcendental functions, so anything implementing [`Float`] works.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
}

/// Converts an `f64` literal into `T`.
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in the scalar type")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// `1 - exp(-x)` without cancellation for small `x`.
#[inline]
pub(crate) fn one_minus_exp_neg<T: Real>(x: T) -> T {
    -(-x).exp_m1()
}

/// `exp(-x) - 1 + x`, accurate down to `x -> 0` where it behaves like `x^2 / 2`.
#[inline]
pub(crate) fn exp_neg_remainder<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-2) {
        let x2 = x * x;
        // x^2/2 - x^3/6 + x^4/24 - x^5/120 + x^6/720
        x2 * (lit::<T>(0.5)
            - x * (lit::<T>(1.0 / 6.0)
                - x * (lit::<T>(1.0 / 24.0) - x * (lit::<T>(1.0 / 120.0) - x * lit::<T>(1.0 / 720.0)))))
    } else {
        x + (-x).exp_m1()
    }
}
