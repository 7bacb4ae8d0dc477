use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Floating-point scalar the numeric kernels are generic over.
///
/// Implemented for `f32` and `f64`. `f64` is the crate default; the
/// finite-difference tolerances quoted in the gradient tests assume it.
/// `f32` trades that precision for simulation throughput.
pub trait Scalar:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts from `f64`, rounding to the nearest representable value.
    fn of(x: f64) -> Self;
    /// Widens to `f64`.
    fn to64(self) -> f64;
    /// Draws a standard normal sample.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

impl Scalar for f64 {
    #[inline]
    fn of(x: f64) -> f64 {
        x
    }
    #[inline]
    fn to64(self) -> f64 {
        self
    }
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        rng.sample(StandardNormal)
    }
}

impl Scalar for f32 {
    #[inline]
    fn of(x: f64) -> f32 {
        x as f32
    }
    #[inline]
    fn to64(self) -> f64 {
        f64::from(self)
    }
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f32 {
        rng.sample(StandardNormal)
    }
}
