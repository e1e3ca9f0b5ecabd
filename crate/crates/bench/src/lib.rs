//! Shared fixtures for the criterion benches.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snse_core::noise::{DecayCheck, QSpec};
use snse_core::spectral::{SpectralField, SpectralGrid};

pub const LENGTH: f64 = 2.0 * PI;

pub fn grid(cutoff: usize) -> SpectralGrid {
    SpectralGrid::new(LENGTH, cutoff).expect("valid grid")
}

/// Power-law covariance with decay 2.5 at unit scale.
pub fn noise(cutoff: usize) -> QSpec {
    QSpec::power_law(grid(cutoff), 1.0, 2.5, DecayCheck::Warn).expect("valid covariance")
}

pub fn smooth_field(cutoff: usize, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralField::random_solenoidal(grid(cutoff), &mut rng, 2.0)
}
