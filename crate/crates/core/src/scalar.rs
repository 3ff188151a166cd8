//! Scalar abstractions: floating-point reals and exact-arithmetic fields.

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar used by the geometry, schemes and rate modules.
///
/// Implemented by `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Scalar supporting only field operations and order comparisons.
///
/// The modulus calculus in [`crate::uniqueness`] needs no square roots or
/// logarithms, so it runs unchanged over exact rationals
/// (`num::BigRational`) as well as over floats.
pub trait Field: Clone + Num + PartialOrd + FromPrimitive + Debug {}

impl<T> Field for T where T: Clone + Num + PartialOrd + FromPrimitive + Debug {}

/// Converts an `f64` literal into the generic scalar.
pub(crate) fn lit<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("scalar literal conversion")
}

/// Builds a small nonnegative integer in an exact-capable field.
pub(crate) fn nat<S: Field>(n: u64) -> S {
    S::from_u64(n).expect("integer embeds into scalar")
}
