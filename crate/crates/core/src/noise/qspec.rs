use log::warn;

use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;
use crate::util::pairwise_sum;

/// What to do when the decay exponent is too small for `A^{1/2} Q A^{1/2}`
/// to be trace class on the untruncated torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecayCheck {
    #[default]
    Warn,
    Reject,
}

/// Diagonal covariance in the divergence-free Fourier basis.
#[derive(Debug, Clone, PartialEq)]
pub struct QSpec {
    grid: SpectralGrid,
    scale: f64,
    decay: f64,
    /// Per lattice index; zero at the mean mode.
    variances: Vec<f64>,
    trace: f64,
    k0: f64,
    slow_decay: bool,
}

impl QSpec {
    /// `q_k = scale * lambda_k^{-decay}`.
    pub fn power_law(grid: SpectralGrid, scale: f64, decay: f64, check: DecayCheck) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise scale must be nonnegative, got {scale}"
            )));
        }
        if !decay.is_finite() {
            return Err(Error::InvalidParameter("noise decay must be finite".into()));
        }
        let slow_decay = decay <= 2.0;
        if slow_decay {
            match check {
                DecayCheck::Reject => {
                    return Err(Error::InvalidParameter(format!(
                        "noise decay {decay} <= 2: Tr(A^1/2 Q A^1/2) diverges without truncation"
                    )))
                }
                DecayCheck::Warn => {
                    warn!("noise decay {decay} <= 2; K0 is finite only because of the mode cutoff")
                }
            }
        }
        let mut variances = vec![0.0; grid.lattice_len()];
        for (idx, k1, k2) in grid.modes() {
            variances[idx] = scale * grid.eigenvalue(k1, k2).powf(-decay);
        }
        let mut q = Self::finish(grid, variances);
        q.scale = scale;
        q.decay = decay;
        q.slow_decay = slow_decay;
        Ok(q)
    }

    /// Arbitrary nonnegative variances given per lattice index (must be
    /// symmetric under `k -> -k`; the mean-mode entry is ignored).
    pub fn from_variances(grid: SpectralGrid, mut variances: Vec<f64>) -> Result<Self> {
        if variances.len() != grid.lattice_len() {
            return Err(Error::GridMismatch(format!(
                "expected {} variances, got {}",
                grid.lattice_len(),
                variances.len()
            )));
        }
        variances[grid.zero_index()] = 0.0;
        for (idx, k1, k2) in grid.modes() {
            let q = variances[idx];
            if !(q.is_finite() && q >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "variance at mode ({k1}, {k2}) must be nonnegative, got {q}"
                )));
            }
            if q != variances[grid.index(-k1, -k2)] {
                return Err(Error::InvalidParameter(format!(
                    "variances at ({k1}, {k2}) and its negative differ"
                )));
            }
        }
        Ok(Self::finish(grid, variances))
    }

    /// Noise on the single Hermitian pair `{k, -k}` with variance `q`.
    pub fn single_pair(grid: SpectralGrid, k1: i64, k2: i64, q: f64) -> Result<Self> {
        if (k1, k2) == (0, 0) || !grid.contains(k1, k2) {
            return Err(Error::InvalidParameter(format!(
                "mode ({k1}, {k2}) is not a retained mode"
            )));
        }
        let mut v = vec![0.0; grid.lattice_len()];
        v[grid.index(k1, k2)] = q;
        v[grid.index(-k1, -k2)] = q;
        Self::from_variances(grid, v)
    }

    fn finish(grid: SpectralGrid, variances: Vec<f64>) -> Self {
        let trace = pairwise_sum(&variances);
        let weighted: Vec<f64> = variances
            .iter()
            .enumerate()
            .map(|(i, q)| q * grid.eigenvalue_at(i))
            .collect();
        Self {
            grid,
            scale: f64::NAN,
            decay: f64::NAN,
            k0: pairwise_sum(&weighted),
            trace,
            variances,
            slow_decay: false,
        }
    }

    /// Rebuilds a covariance read back from disk.
    pub(crate) fn restore(grid: SpectralGrid, scale: f64, decay: f64, variances: Vec<f64>) -> Result<Self> {
        let mut q = Self::from_variances(grid, variances)?;
        q.scale = scale;
        q.decay = decay;
        q.slow_decay = decay <= 2.0;
        Ok(q)
    }

    /// Multiplies every variance by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = Self::finish(self.grid, self.variances.iter().map(|q| q * factor).collect());
        out.scale = self.scale * factor;
        out.decay = self.decay;
        out.slow_decay = self.slow_decay;
        out
    }

    /// Rescales so that `Tr(Q)` equals `trace` (no-op on the zero covariance).
    pub fn with_trace(&self, trace: f64) -> Self {
        if self.trace == 0.0 {
            return self.clone();
        }
        self.scaled(trace / self.trace)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    /// Power-law scale, NaN for covariances built from explicit variances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn variance(&self, k1: i64, k2: i64) -> f64 {
        self.variances[self.grid.index(k1, k2)]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `Tr(Q)`.
    pub fn trace(&self) -> f64 {
        self.trace
    }

    /// `K0 = Tr(A^{1/2} Q A^{1/2})`.
    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// Largest `lambda_k q_k`.
    pub fn max_weighted_variance(&self) -> f64 {
        self.grid
            .modes()
            .map(|(i, k1, k2)| self.variances[i] * self.grid.eigenvalue(k1, k2))
            .fold(0.0, f64::max)
    }

    /// Set when the decay exponent is at most 2.
    pub fn slow_decay(&self) -> bool {
        self.slow_decay
    }

    pub fn is_zero(&self) -> bool {
        self.trace == 0.0
    }
}
