//! Scalar abstraction shared by the closed-form rate and channel code.

use std::fmt::{Debug, Display};

use num_rational::Ratio;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the analytic formulas are written against: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts a literal, panicking only for values the type cannot represent at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Absolute tolerance for iterative solvers: 1e-12, or a few ulps when the
    /// type cannot resolve that.
    #[inline]
    fn solver_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(4.0))
    }

    #[inline]
    fn from_ratio(r: Ratio<u64>) -> Self {
        Self::lit(*r.numer() as f64) / Self::lit(*r.denom() as f64)
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}
