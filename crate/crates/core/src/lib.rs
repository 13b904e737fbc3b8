//! Numerical laboratory for dyadic harmonic analysis.

pub mod error;
pub mod grid;
pub mod haar;
pub mod kernels;
pub mod lab;
pub mod linalg;
pub mod martops;
pub mod median;
pub mod norms;

pub use error::{Error, Result};
