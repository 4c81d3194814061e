//! Quantum reflection of Bose-Einstein condensates and bright solitons from
//! surfaces: mean-field dynamics, plane-wave references and scan drivers.

pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod num;
pub mod params;
pub mod planewave;
pub mod potentials;
pub mod propagator;

pub use error::{Error, Result};

/// Double-precision complex amplitude used throughout the physics code.
pub type Complex64 = num_complex::Complex<f64>;
/// Single-precision complex, usable with the generic numerical kernels.
pub type Complex32 = num_complex::Complex<f32>;
