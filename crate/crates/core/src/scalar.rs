use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar used throughout the workbench.
///
/// Everything numeric (constellations, formulas, codecs, tensors) is written
/// against this trait so the same code runs in `f32` for training and `f64`
/// for formula evaluation and gradient checks.
pub trait Real:
    Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
    + Sum
    + Send
    + Sync
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// Lossy conversion from `f64`; every value we feed through here is
    /// representable up to rounding.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 always converts to a float type")
    }

    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("usize always converts to a float type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float always converts to f64")
    }
}

impl Real for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }
}

impl Real for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn erfc_known_values() {
        assert_eq!(Real::erfc(0.0f64), 1.0);
        assert!((Real::erfc(1.0f64) - 0.157_299_207_050_285_13).abs() < 1e-16);
        assert!((Real::erfc(1.0f32) - 0.157_299_2).abs() < 1e-6);
    }

    #[test]
    fn conversions() {
        assert_eq!(f32::of(0.5), 0.5f32);
        assert_eq!(f64::of_usize(9), 9.0);
        assert_eq!(2.5f32.as_f64(), 2.5);
    }
}
