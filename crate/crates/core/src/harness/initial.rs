use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{sample_gaussian_u0, DecayCheck, QSpec};
use crate::spectral::{SpectralField, SpectralGrid};

/// Initial velocity of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    Zero,
    /// `amplitude cos(k1 x) e_y`-type shear along the mode `(k1, 0)`.
    Shear { amplitude: f64, wavenumber: i64 },
    /// One fixed random field with coefficient spectrum `lambda^{-decay}`
    /// and `L^2` norm `amplitude`, drawn from `seed` (the same for every
    /// replicate).
    RandomSmooth { amplitude: f64, decay: f64, seed: u64 },
    /// Gaussian field with covariance `scale lambda^{-decay}`, independent
    /// per replicate and independent of the noise.
    Gaussian { scale: f64, decay: f64 },
}

impl InitialCondition {
    pub fn validate(&self, grid: &SpectralGrid) -> Result<()> {
        match *self {
            Self::Zero => Ok(()),
            Self::Shear { amplitude, wavenumber } => {
                if !amplitude.is_finite() {
                    return Err(Error::InvalidParameter("shear amplitude must be finite".into()));
                }
                if wavenumber == 0 || !grid.contains(wavenumber, 0) {
                    return Err(Error::InvalidParameter(format!(
                        "shear wavenumber {wavenumber} is not a retained nonzero mode"
                    )));
                }
                Ok(())
            }
            Self::RandomSmooth { amplitude, decay, .. } => {
                if !(amplitude.is_finite() && amplitude >= 0.0 && decay.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "random initial field needs a finite nonnegative amplitude and finite decay".into(),
                    ));
                }
                Ok(())
            }
            Self::Gaussian { scale, decay } => {
                QSpec::power_law(*grid, scale, decay, DecayCheck::Reject)?;
                Ok(())
            }
        }
    }

    /// Whether the field differs between replicates.
    pub fn is_random(&self) -> bool {
        matches!(self, Self::Gaussian { .. })
    }

    /// Covariance of the Gaussian variant.
    pub fn covariance(&self, grid: &SpectralGrid) -> Result<Option<QSpec>> {
        match *self {
            Self::Gaussian { scale, decay } => Ok(Some(QSpec::power_law(*grid, scale, decay, DecayCheck::Reject)?)),
            _ => Ok(None),
        }
    }

    /// Largest admissible exponential-moment parameter `gamma_0` with
    /// `E exp(gamma_0 |A^{1/2} u_0|^2) < inf`, i.e. `1 / (2 max lambda q)`.
    /// `None` for deterministic data, where every `gamma_0` works.
    pub fn gamma0_bound(&self, grid: &SpectralGrid) -> Result<Option<f64>> {
        Ok(self.covariance(grid)?.map(|q| {
            let m = q.max_weighted_variance();
            if m > 0.0 {
                1.0 / (2.0 * m)
            } else {
                f64::INFINITY
            }
        }))
    }

    /// The initial field of replicate `seed`.
    pub fn sample(&self, grid: SpectralGrid, seed: u64) -> Result<SpectralField> {
        self.validate(&grid)?;
        Ok(match *self {
            Self::Zero => SpectralField::zeros(grid),
            Self::Shear { amplitude, wavenumber } => SpectralField::solenoidal_mode(grid, wavenumber, 0, amplitude, 0.0)?,
            Self::RandomSmooth { amplitude, decay, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                SpectralField::random_solenoidal(grid, &mut rng, decay).scaled(amplitude)
            }
            Self::Gaussian { scale, decay } => {
                let q = QSpec::power_law(grid, scale, decay, DecayCheck::Reject)?;
                sample_gaussian_u0(&q, seed)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn variants() {
        let g = SpectralGrid::new(2.0 * PI, 4).unwrap();
        assert_eq!(InitialCondition::Zero.sample(g, 3).unwrap().l2_norm(), 0.0);
        let s = InitialCondition::Shear {
            amplitude: 2.0,
            wavenumber: 1,
        }
        .sample(g, 0)
        .unwrap();
        // a cos(x) e_y on [0, 2 pi]^2 has |u|^2 = a^2 2 pi^2
        assert!((s.l2_norm_sq() - 4.0 * 2.0 * PI * PI).abs() < 1e-10);
        let r = InitialCondition::RandomSmooth {
            amplitude: 0.5,
            decay: 3.0,
            seed: 7,
        };
        assert_eq!(r.sample(g, 1).unwrap(), r.sample(g, 2).unwrap());
        assert!((r.sample(g, 1).unwrap().l2_norm() - 0.5).abs() < 1e-14);
        let gauss = InitialCondition::Gaussian { scale: 1.0, decay: 3.0 };
        assert_ne!(gauss.sample(g, 1).unwrap(), gauss.sample(g, 2).unwrap());
        assert!(gauss.is_random() && !r.is_random());
        assert!(InitialCondition::Shear {
            amplitude: 1.0,
            wavenumber: 9
        }
        .validate(&g)
        .is_err());
        assert!(InitialCondition::Gaussian { scale: 1.0, decay: 1.0 }.validate(&g).is_err());
    }
}
