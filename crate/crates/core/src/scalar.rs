//! Scalar abstraction shared by all numerical modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the identification routines are generic over.
///
/// The associated constants are numerical floors that depend on the working
/// precision: a residual sum of squares below `EXACT_FIT` times the target
/// energy is treated as an exact fit, and simulated errors below `MSSE_FLOOR`
/// times the target mean square are indistinguishable from round-off.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    const EXACT_FIT: Self;
    const MSSE_FLOOR: Self;

    /// Shorthand for constants that are always representable.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    const EXACT_FIT: Self = 1e-20;
    const MSSE_FLOOR: Self = 1e-14;
}

impl Real for f32 {
    const EXACT_FIT: Self = 1e-9;
    const MSSE_FLOOR: Self = 1e-6;
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn sum_sq<T: Real>(a: &[T]) -> T {
    a.iter().map(|&x| x * x).sum()
}

pub fn mean<T: Real>(a: &[T]) -> T {
    if a.is_empty() {
        return T::zero();
    }
    a.iter().copied().sum::<T>() / T::from_usize_lossy(a.len())
}

/// Population variance (1/n normalisation).
pub fn variance<T: Real>(a: &[T]) -> T {
    if a.is_empty() {
        return T::zero();
    }
    let m = mean(a);
    a.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(a.len())
}
