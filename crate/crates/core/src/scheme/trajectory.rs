use std::io::{Read, Write};

use num_complex::Complex64;

use super::params::SchemeKind;
use super::step::StepStats;
use crate::error::{Error, Result};
use crate::noise::{read_f64, read_u64};
use crate::spectral::{SpectralField, SpectralGrid};

const TRAJECTORY_MAGIC: &[u8; 4] = b"NST1";

/// States `u^0, ..., u^N` of one run together with per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    kind: SchemeKind,
    convection: bool,
    viscosity: f64,
    horizon: f64,
    seed: u64,
    states: Vec<SpectralField>,
    stats: Vec<StepStats>,
}

impl Trajectory {
    pub(crate) fn new(
        kind: SchemeKind,
        convection: bool,
        viscosity: f64,
        horizon: f64,
        seed: u64,
        states: Vec<SpectralField>,
        stats: Vec<StepStats>,
    ) -> Self {
        debug_assert_eq!(states.len(), stats.len() + 1);
        Self {
            kind,
            convection,
            viscosity,
            horizon,
            seed,
            states,
            stats,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn convection(&self) -> bool {
        self.convection
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.states[0].grid()
    }

    /// Number of time steps `N`.
    pub fn steps(&self) -> usize {
        self.stats.len()
    }

    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    pub fn states(&self) -> &[SpectralField] {
        &self.states
    }

    pub fn state(&self, l: usize) -> &SpectralField {
        &self.states[l]
    }

    pub fn last(&self) -> &SpectralField {
        self.states.last().expect("trajectory has at least one state")
    }

    pub fn stats(&self) -> &[StepStats] {
        &self.stats
    }

    pub fn iterations(&self) -> Vec<usize> {
        self.stats.iter().map(|s| s.iterations).collect()
    }

    pub fn energy_residuals(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.energy_residual).collect()
    }

    /// `|A^{1/2} u^l|^2` for `l = 1..=N`.
    pub fn v_norms_sq(&self) -> Vec<f64> {
        self.states[1..].iter().map(|u| u.v_norm_sq()).collect()
    }

    /// Running sums `k nu sum_{j <= l} |A u^j|^2` for `l = 1..=N`.
    pub fn dissipation(&self) -> Vec<f64> {
        let c = self.step_size() * self.viscosity;
        let mut acc = 0.0;
        self.states[1..]
            .iter()
            .map(|u| {
                acc += c * u.sobolev_norm_sq(2.0);
                acc
            })
            .collect()
    }

    /// Writes the `NST1` layout (little endian): magic, `L`, `M`, `N`, `T`,
    /// `nu`, scheme code, convection flag, seed; then `N + 1` coefficient
    /// blocks of `(2M+1)^2 x (re, im, re, im)`; then per step the iteration
    /// count and the fixed-point and energy residuals.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        w.write_all(TRAJECTORY_MAGIC)?;
        w.write_all(&g.length().to_le_bytes())?;
        w.write_all(&(g.cutoff() as u64).to_le_bytes())?;
        w.write_all(&(self.steps() as u64).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.viscosity.to_le_bytes())?;
        w.write_all(&[self.kind.code(), self.convection as u8])?;
        w.write_all(&self.seed.to_le_bytes())?;
        for u in &self.states {
            for c in u.coefficients() {
                for z in c {
                    w.write_all(&z.re.to_le_bytes())?;
                    w.write_all(&z.im.to_le_bytes())?;
                }
            }
        }
        for s in &self.stats {
            w.write_all(&(s.iterations as u64).to_le_bytes())?;
            w.write_all(&s.fixed_point_residual.to_le_bytes())?;
            w.write_all(&s.energy_residual.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != TRAJECTORY_MAGIC {
            return Err(Error::Format(format!(
                "expected trajectory magic NST1, found {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let length = read_f64(&mut r)?;
        let cutoff = read_u64(&mut r)? as usize;
        let steps = read_u64(&mut r)? as usize;
        let horizon = read_f64(&mut r)?;
        let viscosity = read_f64(&mut r)?;
        let mut flags = [0u8; 2];
        r.read_exact(&mut flags)?;
        let kind = SchemeKind::from_code(flags[0])
            .ok_or_else(|| Error::Format(format!("unknown scheme code {}", flags[0])))?;
        let seed = read_u64(&mut r)?;
        let grid = SpectralGrid::new(length, cutoff)?;
        if steps == 0 || steps > 1 << 32 {
            return Err(Error::Format(format!("invalid step count {steps}")));
        }
        let mut states = Vec::with_capacity(steps + 1);
        for _ in 0..=steps {
            let mut coeffs = Vec::with_capacity(grid.lattice_len());
            for _ in 0..grid.lattice_len() {
                let mut c = [Complex64::new(0.0, 0.0); 2];
                for z in c.iter_mut() {
                    z.re = read_f64(&mut r)?;
                    z.im = read_f64(&mut r)?;
                }
                coeffs.push(c);
            }
            states.push(SpectralField::from_coefficients(grid, coeffs)?);
        }
        let mut stats = Vec::with_capacity(steps);
        for _ in 0..steps {
            stats.push(StepStats {
                iterations: read_u64(&mut r)? as usize,
                fixed_point_residual: read_f64(&mut r)?,
                energy_residual: read_f64(&mut r)?,
            });
        }
        Ok(Self::new(kind, flags[1] != 0, viscosity, horizon, seed, states, stats))
    }
}
