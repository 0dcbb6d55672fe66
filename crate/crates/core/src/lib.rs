//! Pseudo-spectral simulation and verification suite for perturbations of
//! plane Couette flow in the shearing frame.

pub mod checkpoint;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linear;
pub mod multipliers;
pub mod nonlinear;
pub mod quadrature;
pub mod spectral;
pub mod streak;
pub mod threshold;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;
