use crate::error::{Error, Result};
use crate::fem::{FemSystem, FemTrajectory};
use crate::scheme::Trajectory;

/// Strong-error functionals of one replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub seed: u64,
    /// `max_l |e_l|^2` over the coarse grid times `l = 1..N`.
    pub max_l2_sq: f64,
    /// Dissipation term: `nu k sum_l |A^{1/2} e_l|^2` for spectral
    /// comparisons, `k sum_l |grad E_l|^2` for finite elements.
    pub dissipation: f64,
    pub valid: bool,
}

impl ErrorSample {
    pub fn invalid(seed: u64) -> Self {
        Self {
            seed,
            max_l2_sq: f64::NAN,
            dissipation: f64::NAN,
            valid: false,
        }
    }

    pub fn l2(&self) -> Option<f64> {
        self.valid.then_some(self.max_l2_sq)
    }

    pub fn v(&self) -> Option<f64> {
        self.valid.then_some(self.dissipation)
    }
}

fn subsample_ratio(fine_steps: usize, coarse_steps: usize, fine_t: f64, coarse_t: f64) -> Result<usize> {
    if fine_t != coarse_t {
        return Err(Error::TimeGridMismatch(format!("horizons {fine_t} and {coarse_t} differ")));
    }
    if coarse_steps == 0 || fine_steps % coarse_steps != 0 {
        return Err(Error::TimeGridMismatch(format!(
            "{coarse_steps} coarse steps do not subdivide {fine_steps} reference steps"
        )));
    }
    Ok(fine_steps / coarse_steps)
}

/// Errors `e_l = u_ref(t_l) - u_l` with the reference subsampled at the
/// coarse grid times.
pub fn strong_error(reference: &Trajectory, coarse: &Trajectory) -> Result<ErrorSample> {
    let r = subsample_ratio(reference.steps(), coarse.steps(), reference.horizon(), coarse.horizon())?;
    if reference.grid() != coarse.grid() {
        return Err(Error::GridMismatch("trajectories live on different lattices".into()));
    }
    let k = coarse.step_size();
    let nu = coarse.viscosity();
    let mut max_l2 = 0.0f64;
    let mut diss = 0.0;
    for l in 1..=coarse.steps() {
        let e = reference.state(l * r).difference(coarse.state(l));
        max_l2 = max_l2.max(e.l2_norm_sq());
        diss += nu * k * e.v_norm_sq();
    }
    Ok(ErrorSample {
        seed: coarse.seed(),
        max_l2_sq: max_l2,
        dissipation: diss,
        valid: true,
    })
}

/// Errors `E_l = I_h u(t_l) - U_l` between a spectral reference and a
/// finite-element trajectory, measured exactly through the mass and
/// stiffness matrices.
pub fn strong_error_fem(reference: &Trajectory, fem: &FemTrajectory, system: &FemSystem) -> Result<ErrorSample> {
    let horizon = fem.step_size * fem.steps() as f64;
    if (horizon - reference.horizon()).abs() > 1e-12 * reference.horizon() {
        return Err(Error::TimeGridMismatch(format!(
            "horizons {} and {horizon} differ",
            reference.horizon()
        )));
    }
    let r = subsample_ratio(reference.steps(), fem.steps(), reference.horizon(), reference.horizon())?;
    let k = fem.step_size;
    let mut max_l2 = 0.0f64;
    let mut diss = 0.0;
    for l in 1..=fem.steps() {
        let e = system.interp_from_spectral(reference.state(l * r))?.difference(&fem.velocities[l]);
        max_l2 = max_l2.max(system.l2_norm_sq(&e));
        diss += k * system.h1_seminorm_sq(&e);
    }
    Ok(ErrorSample {
        seed: reference.seed(),
        max_l2_sq: max_l2,
        dissipation: diss,
        valid: true,
    })
}
