//! Scalar abstraction shared by the numeric modules.
//!
//! Everything that touches sampled signals, spectra, PCA bases or classifier
//! weights is generic over [`Scalar`], which `f32` and `f64` implement.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use rustfft::FftNum;

/// Floating point type usable throughout the pipeline.
///
/// `FftNum` brings `num_traits::Signed` along, whose `abs`/`signum` shadow the
/// `Float` methods of the same name; call those as `Float::abs(x)`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + FftNum + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Never fails for the implemented types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Lossy-free widening to `f64`.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    /// Short type tag used by persistence layers.
    const NAME: &'static str;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";
}

/// Dot product of two equally long slices.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
