use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar the estimation kernels are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal; every supported scalar can represent one (possibly rounded).
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Relative tolerance for exact algebraic identities evaluated in this precision.
    fn identity_tolerance() -> Self {
        Self::lit(1e-8).max(Self::epsilon() * Self::lit(1e4))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `|a - b| <= tol * max(|a|, |b|, floor)`.
pub(crate) fn rel_close<T: Scalar>(a: T, b: T, tol: T, floor: T) -> bool {
    let scale = a.abs().max(b.abs()).max(floor);
    (a - b).abs() <= tol * scale
}
