//! Scalar abstraction: the numerical core is generic over the floating-point
//! type through `num-traits`, so every operator and scheme works unchanged at
//! `f32` and `f64`. Concrete aliases for the common `f64` instantiation live
//! at the crate root.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::FftNum;

/// Floating-point scalar usable throughout the crate.
///
/// `FftNum` brings the bounds required by the FFT backend; the rest are the
/// usual float/constant/conversion traits plus formatting for reports.
pub trait Scalar:
    Float
    + FloatConst
    + FftNum
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + Display
    + LowerExp
    + Debug
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossless-enough conversion from `f64` (used for noise increments and
    /// configuration constants; exact when `Self = f64`).
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to scalar")
    }

    /// Conversion to `f64` for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FftNum
        + NumAssign
        + FromPrimitive
        + ToPrimitive
        + Sum<T>
        + Display
        + LowerExp
        + Debug
        + Default
        + Send
        + Sync
        + 'static
{
}
