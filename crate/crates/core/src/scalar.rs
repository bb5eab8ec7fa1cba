use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the numeric kernels are written against: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// A tolerance no tighter than what the type can resolve: `max(base, 64 * eps)`.
    #[inline]
    fn tol(base: f64) -> Self {
        Self::lit(base).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub(crate) fn dot<R: Real>(a: &[R], b: &[R]) -> R {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub(crate) fn norm2<R: Real>(a: &[R]) -> R {
    dot(a, a).sqrt()
}
