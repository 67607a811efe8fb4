//! Scalar abstraction over the floating-point element type.
//!
//! All vector, compressor and solver math is written against [`Scalar`] so the
//! same code runs in `f32` or `f64`; the harness and CLI pin `f64` through the
//! type aliases at the crate root.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point element type usable throughout the crate.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` configuration value (step size, tolerance, ...).
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("configuration value representable in scalar type")
    }

    /// Converts a count (dimension, node index, sample size) into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    /// Widens to `f64` for reporting and trace output.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    fn two() -> Self {
        Self::one() + Self::one()
    }

    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
