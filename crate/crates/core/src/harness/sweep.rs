use log::{debug, warn};

use super::errors::{strong_error, strong_error_fem, ErrorSample};
use super::initial::InitialCondition;
use super::rate::{RateReport, RateRow};
use super::stats::{replicate_seed, run_replicates};
use crate::error::{Error, Result};
use crate::fem::{fem_initial_value, run_fem_with, FemStepper, FemSystem, PeriodicMesh};
use crate::noise::{sample_path, QSpec};
use crate::scheme::{run_scheme, SchemeKind, SchemeParams};

/// Coupled Monte Carlo sweep over time step counts: every level and the
/// reference are driven by the same noise path per replicate.
#[derive(Debug, Clone)]
pub struct TimeSweep {
    pub viscosity: f64,
    pub horizon: f64,
    pub noise: QSpec,
    pub initial: InitialCondition,
    /// Step counts `N`, strictly increasing.
    pub levels: Vec<usize>,
    /// Reference step count; a power of two divisible by every level.
    pub reference_steps: usize,
    pub replicates: usize,
    pub master_seed: u64,
    /// Scheme measured at the levels.
    pub scheme: SchemeKind,
    /// Scheme producing the reference (the exact linear solution for
    /// [`SchemeKind::OuExact`]).
    pub reference: SchemeKind,
    pub convection: bool,
    pub tolerance: f64,
    pub max_iter: usize,
}

/// Per-level samples next to the report built from them.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub report: RateReport,
    /// `samples[level][replicate]`.
    pub samples: Vec<Vec<ErrorSample>>,
    /// Replicates whose reference run failed (invalid at every level).
    pub reference_failures: usize,
    /// Smallest level at which every replicate converged.
    pub smallest_converged_level: Option<usize>,
}

fn check_levels(levels: &[usize], reference: usize, what: &str) -> Result<()> {
    if levels.is_empty() {
        return Err(Error::InvalidParameter(format!("{what} sweep needs at least one level")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("{what} levels must be strictly increasing")));
    }
    if let Some(&bad) = levels.iter().find(|&&n| n == 0 || reference % n != 0) {
        return Err(Error::InvalidParameter(format!(
            "reference step count {reference} is not a multiple of level {bad}"
        )));
    }
    Ok(())
}

/// Solver breakdowns make a replicate invalid; anything else is a bug or a
/// configuration error and aborts the sweep.
fn solver_failure(e: &Error) -> bool {
    matches!(e, Error::NonConvergence { .. } | Error::LinearSolver(_))
}

impl TimeSweep {
    pub fn validate(&self) -> Result<()> {
        check_levels(&self.levels, self.reference_steps, "time")?;
        if !self.reference_steps.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "reference step count {} must be a power of two",
                self.reference_steps
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("at least one replicate is required".into()));
        }
        if self.scheme == SchemeKind::OuExact {
            return Err(Error::InvalidParameter("the exact linear solution cannot be a sweep level".into()));
        }
        if self.reference == SchemeKind::OuExact && self.convection {
            return Err(Error::InvalidParameter(
                "the exact linear reference needs convection switched off".into(),
            ));
        }
        self.initial.validate(self.noise.grid())?;
        self.params(self.scheme, self.reference_steps).map(|_| ())
    }

    fn params(&self, kind: SchemeKind, steps: usize) -> Result<SchemeParams> {
        let p = SchemeParams::new(self.viscosity, self.horizon, steps, kind)?.with_tolerance(self.tolerance, self.max_iter)?;
        Ok(if self.convection { p } else { p.without_convection() })
    }

    /// Error samples of one replicate, one per level.
    pub fn replicate(&self, index: usize) -> Result<Vec<ErrorSample>> {
        let seed = replicate_seed(self.master_seed, index as u64);
        let path = sample_path(&self.noise, self.reference_steps, self.horizon, seed)?;
        let u0 = self.initial.sample(*self.noise.grid(), seed)?;
        let reference = match run_scheme(&u0, &path, &self.params(self.reference, self.reference_steps)?) {
            Ok(t) => t,
            Err(e) if solver_failure(&e) => {
                warn!("replicate {index} (seed {seed}): reference failed: {e}");
                return Ok(vec![ErrorSample::invalid(seed); self.levels.len()]);
            }
            Err(e) => return Err(e),
        };
        self.levels
            .iter()
            .map(|&n| match run_scheme(&u0, &path, &self.params(self.scheme, n)?) {
                Ok(coarse) => strong_error(&reference, &coarse),
                Err(e) if solver_failure(&e) => {
                    debug!("replicate {index} (seed {seed}), N = {n}: {e}");
                    Ok(ErrorSample::invalid(seed))
                }
                Err(e) => Err(e),
            })
            .collect()
    }

    pub fn run(&self) -> Result<SweepOutcome> {
        self.validate()?;
        let per_rep: Vec<Vec<ErrorSample>> = run_replicates(self.replicates, |i| self.replicate(i))
            .into_iter()
            .collect::<Result<_>>()?;
        let reference_failures = per_rep.iter().filter(|r| r.iter().all(|s| !s.valid)).count();
        let scales: Vec<f64> = self.levels.iter().map(|&n| self.horizon / n as f64).collect();
        Ok(assemble("N", &self.levels, &scales, per_rep, reference_failures))
    }
}

fn assemble(
    sweep_var: &str,
    levels: &[usize],
    scales: &[f64],
    per_rep: Vec<Vec<ErrorSample>>,
    reference_failures: usize,
) -> SweepOutcome {
    let samples: Vec<Vec<ErrorSample>> = (0..levels.len())
        .map(|j| per_rep.iter().map(|r| r[j]).collect())
        .collect();
    let rows = levels
        .iter()
        .zip(scales)
        .zip(&samples)
        .map(|((&level, &scale), s)| {
            let l2: Vec<Option<f64>> = s.iter().map(|e| e.l2()).collect();
            let v: Vec<Option<f64>> = s.iter().map(|e| e.v()).collect();
            RateRow::from_samples(level, scale, &l2, &v)
        })
        .collect();
    let smallest_converged_level = levels
        .iter()
        .zip(&samples)
        .find(|(_, s)| s.iter().all(|e| e.valid))
        .map(|(&n, _)| n);
    SweepOutcome {
        report: RateReport::new(sweep_var, rows),
        samples,
        reference_failures,
        smallest_converged_level,
    }
}

/// Coupled sweep over Taylor-Hood meshes at a fixed time step: the
/// finite-element scheme against the spectral fully implicit scheme with
/// the same step and noise path.
#[derive(Debug, Clone)]
pub struct SpaceSweep {
    pub viscosity: f64,
    pub horizon: f64,
    pub noise: QSpec,
    pub initial: InitialCondition,
    /// Mesh subdivisions `n`, strictly increasing.
    pub levels: Vec<usize>,
    /// Number of time steps (a power of two) shared by both schemes.
    pub steps: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub convection: bool,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl SpaceSweep {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("mesh levels must be nonempty and strictly increasing".into()));
        }
        if let Some(&bad) = self.levels.iter().find(|&&n| n < 2) {
            return Err(Error::InvalidParameter(format!("mesh level {bad} is below 2")));
        }
        if !self.steps.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("step count {} must be a power of two", self.steps)));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("at least one replicate is required".into()));
        }
        self.initial.validate(self.noise.grid())?;
        self.params().map(|_| ())
    }

    fn params(&self) -> Result<SchemeParams> {
        let p = SchemeParams::new(self.viscosity, self.horizon, self.steps, SchemeKind::Implicit)?
            .with_tolerance(self.tolerance, self.max_iter)?;
        Ok(if self.convection { p } else { p.without_convection() })
    }

    /// Assembled systems, one per level.
    pub fn systems(&self) -> Result<Vec<FemSystem>> {
        self.levels
            .iter()
            .map(|&n| Ok(FemSystem::new(PeriodicMesh::new(self.noise.grid().length(), n)?)))
            .collect()
    }

    fn replicate(&self, index: usize, steppers: &[FemStepper<'_>]) -> Result<Vec<ErrorSample>> {
        let seed = replicate_seed(self.master_seed, index as u64);
        let path = sample_path(&self.noise, self.steps, self.horizon, seed)?;
        let u0 = self.initial.sample(*self.noise.grid(), seed)?;
        let reference = match run_scheme(&u0, &path, &self.params()?) {
            Ok(t) => t,
            Err(e) if solver_failure(&e) => {
                warn!("replicate {index} (seed {seed}): spectral reference failed: {e}");
                return Ok(vec![ErrorSample::invalid(seed); self.levels.len()]);
            }
            Err(e) => return Err(e),
        };
        steppers
            .iter()
            .map(|st| {
                let sys = st.system();
                let fem_u0 = fem_initial_value(sys, &u0)?;
                match run_fem_with(st, &fem_u0, &path, self.convection) {
                    Ok(fem) => strong_error_fem(&reference, &fem, sys),
                    Err(e) if solver_failure(&e) => {
                        debug!("replicate {index} (seed {seed}), n = {}: {e}", sys.mesh().subdivisions());
                        Ok(ErrorSample::invalid(seed))
                    }
                    Err(e) => Err(e),
                }
            })
            .collect()
    }

    pub fn run(&self) -> Result<SweepOutcome> {
        self.validate()?;
        let systems = self.systems()?;
        let k = self.horizon / self.steps as f64;
        let steppers: Vec<FemStepper<'_>> = systems
            .iter()
            .map(|s| FemStepper::new(s, k, self.viscosity))
            .collect::<Result<_>>()?;
        let per_rep: Vec<Vec<ErrorSample>> = run_replicates(self.replicates, |i| self.replicate(i, &steppers))
            .into_iter()
            .collect::<Result<_>>()?;
        let reference_failures = per_rep.iter().filter(|r| r.iter().all(|s| !s.valid)).count();
        let scales: Vec<f64> = systems.iter().map(|s| s.mesh().h()).collect();
        Ok(assemble("n", &self.levels, &scales, per_rep, reference_failures))
    }
}
