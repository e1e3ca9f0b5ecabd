//! Numerical schemes for the two-dimensional incompressible Navier-Stokes
//! equations on a periodic square, driven by additive Gaussian noise.

pub mod error;
pub mod fem;
pub mod harness;
pub mod noise;
pub mod scheme;
pub mod spectral;
pub mod util;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
pub use noise::{sample_gaussian_u0, sample_path, DecayCheck, NoisePath, QSpec};
pub use spectral::{SpectralField, SpectralGrid};
pub use scheme::{run_scheme, SchemeKind, SchemeParams, Trajectory};
