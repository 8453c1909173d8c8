//! Quartic anharmonic oscillator `-ψ'' + x⁴ψ = Eψ`: exact high-order WKB
//! quantization, the derived large-N expansion of the eigenvalues, its
//! conformally mapped double Borel resummation, and high-precision eigenvalues
//! from a Taylor-series shooting solver.

pub mod error;
pub mod experiment;
pub mod io;
pub mod numerics;
pub mod resum;
pub mod series;
pub mod spectral;
pub mod termlist;
pub mod wkb;

pub use error::{Error, Result};
pub use numerics::{Complex, PrecisionContext, Real};
