//! Thin elastic beams clamped on a shrinking end patch.
//!
//! The crate solves the 3D elasticity problem on a thin cylinder `(0,1) x eps S`
//! clamped on `{0} x eps r S0` and `{1} x eps S`, the one-dimensional limit beam
//! problem for each clamping regime, and the half-space potentials that produce the
//! boundary penalty and the strain corrector at critical patch sizes.

pub mod beam;
pub mod capacity;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod material;
pub mod regimes;

pub use error::{Error, Result};
