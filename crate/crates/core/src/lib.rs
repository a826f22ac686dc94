//! Numerical laboratory for the Airy group, dyadic (hat-)Morrey norms,
//! bilinear frequency regions and the mass-subcritical gKdV equation.

pub mod error;
pub mod dyadic;
pub mod exponents;
pub mod morrey;
pub mod airy;
pub mod gkdv;
pub mod deform;
pub mod lab;
pub mod spectral;

pub use error::{LabError, Result};
