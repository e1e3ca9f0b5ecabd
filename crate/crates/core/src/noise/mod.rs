//! Additive Q-Wiener noise: covariance, coupled Brownian paths and Gaussian
//! initial data.

mod path;
mod qspec;

pub use path::{sample_gaussian_u0, sample_path, NoisePath};
pub use qspec::{DecayCheck, QSpec};

pub(crate) use path::{read_f64, read_u64};
