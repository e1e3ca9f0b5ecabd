//! Time discretizations on the divergence-free spectral space.

mod ou;
mod params;
mod step;
mod trajectory;

pub use ou::{ou_exact_trajectory, ou_variance, OuStep};
pub use params::{SchemeKind, SchemeParams};
pub use step::{
    energy_residual, implicit_step, implicit_step_with_stats, pressure_gradient, semi_implicit_step,
    semi_implicit_step_with_stats, StepStats,
};
pub use trajectory::Trajectory;

use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::spectral::SpectralField;

/// Runs the scheme selected by `p.kind` from `u0` with increments of `path`
/// on `p.steps` uniform steps.
pub fn run_scheme(u0: &SpectralField, path: &NoisePath, p: &SchemeParams) -> Result<Trajectory> {
    p.validate()?;
    if p.horizon != path.horizon() {
        return Err(Error::TimeGridMismatch(format!(
            "scheme horizon {} differs from noise horizon {}",
            p.horizon,
            path.horizon()
        )));
    }
    if p.kind == SchemeKind::OuExact {
        return ou_exact_trajectory(u0, path, p);
    }
    let increments = path.increments(p.steps)?;
    run_with_increments(u0, &increments, p, path.seed())
}

/// Runs the implicit or semi-implicit scheme with explicit increments.
/// A failing step is reported with its 1-based index.
pub fn run_with_increments(
    u0: &SpectralField,
    increments: &[SpectralField],
    p: &SchemeParams,
    seed: u64,
) -> Result<Trajectory> {
    p.validate()?;
    if increments.len() != p.steps {
        return Err(Error::TimeGridMismatch(format!(
            "{} increments for {} steps",
            increments.len(),
            p.steps
        )));
    }
    let step = match p.kind {
        SchemeKind::Implicit => implicit_step_with_stats,
        SchemeKind::SemiImplicit => semi_implicit_step_with_stats,
        SchemeKind::OuExact => {
            return Err(Error::InvalidParameter(
                "the exact linear solution needs the full noise path".into(),
            ))
        }
    };
    let mut states = Vec::with_capacity(p.steps + 1);
    let mut stats = Vec::with_capacity(p.steps);
    states.push(u0.clone());
    for (l, dw) in increments.iter().enumerate() {
        let prev = states.last().unwrap();
        let (u, s) = step(prev, dw, p).map_err(|e| match e {
            Error::NonConvergence {
                iterations, residual, ..
            } => Error::NonConvergence {
                step: l + 1,
                iterations,
                residual,
            },
            other => other,
        })?;
        states.push(u);
        stats.push(s);
    }
    Ok(Trajectory::new(
        p.kind,
        p.convection,
        p.viscosity,
        p.horizon,
        seed,
        states,
        stats,
    ))
}
