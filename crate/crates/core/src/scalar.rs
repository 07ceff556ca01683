//! Scalar abstraction for the numerical core.
//!
//! All geometry in this crate is written against [`Scalar`], so the same code
//! runs at `f32` or `f64`. Concrete type aliases for `f64` live at the crate
//! root.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by every numerical routine in the crate.
pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {
    /// Lossy conversion from `f64`, for literals and tolerances.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("f64 conversion")
    }
}

impl<T> Scalar for T where T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}
