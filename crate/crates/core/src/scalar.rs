//! Scalar abstraction shared by every solver component.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Picks the looser of a requested tolerance and a multiple of machine epsilon,
    /// so tolerances written for `f64` stay attainable in `f32`.
    #[inline]
    fn tol(requested: f64, eps_multiple: f64) -> Self {
        Self::lit(requested).max(Self::epsilon() * Self::lit(eps_multiple))
    }
}

impl Real for f32 {}
impl Real for f64 {}
