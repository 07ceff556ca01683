//! Numerical engine for dually flat and quasi-Hessian geometry.
//!
//! From user-supplied generating functions `g(x_I, p_J)` this crate computes
//! e/m-wavefronts and caustics, the (possibly degenerate) quasi-Hessian
//! metric, the canonical cubic tensor, the canonical divergence, and verifies
//! the extended Pythagorean, projection, and weak-contrast identities at desk
//! scale.
//!
//! The numerical core is generic over the scalar type via [`scalar::Scalar`];
//! concrete `f64` aliases are exported below.

pub mod divergence;
pub mod equivalence;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod frontsampler;
pub mod geodesy;
pub mod jet;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod tensors;

pub use error::{Error, Result};

/// Third-order jet at `f64` precision.
pub type Jet = jet::Jet3<f64>;
/// Contact point at `f64` precision.
pub type Point = model::ContactPoint<f64>;
/// Dense matrix at `f64` precision.
pub type Matrix = linalg::Mat<f64>;
