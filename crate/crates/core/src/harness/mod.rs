//! Study configuration, the epsilon sweep and report writers.

pub mod config;
mod study;

pub use config::{Expr, MaterialSpec, StudyConfig};
pub use study::*;
