//! Fully discrete Taylor-Hood scheme with convection linearized around the
//! previous velocity.

use log::debug;

use super::sparse::CsrMatrix;
use super::system::{FemField, FemPressure, FemSystem, StokesSolver};
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::spectral::SpectralField;

/// Diagnostics of one finite-element time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemStepStats {
    /// Correction sweeps against the convection-free factorization; zero when
    /// the step was solved with a fresh factorization.
    pub sweeps: usize,
    pub refactored: bool,
    /// Max-norm residual of the saddle system relative to the right-hand side.
    pub linear_residual: f64,
    pub energy_residual: f64,
    pub divergence_residual: f64,
}

/// Solver for `(U - U_prev, Phi) + k nu (grad U, grad Phi)
/// + k b~(U_prev, U, Phi) - (P, div Phi) = (dW, Phi)`, `(div U, psi) = 0`,
/// with `P = k Pi` the scaled pressure.
pub struct FemStepper<'a> {
    system: &'a FemSystem,
    step_size: f64,
    viscosity: f64,
    base: CsrMatrix,
    base_solver: StokesSolver,
    tolerance: f64,
    max_sweeps: usize,
}

impl std::fmt::Debug for FemStepper<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemStepper")
            .field("step_size", &self.step_size)
            .field("viscosity", &self.viscosity)
            .field("tolerance", &self.tolerance)
            .finish()
    }
}

impl<'a> FemStepper<'a> {
    pub fn new(system: &'a FemSystem, step_size: f64, viscosity: f64) -> Result<Self> {
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {step_size}")));
        }
        if !(viscosity > 0.0 && viscosity.is_finite()) {
            return Err(Error::InvalidParameter(format!("viscosity must be positive, got {viscosity}")));
        }
        let base = system.mass().add_same_pattern(step_size * viscosity, system.stiffness())?;
        let base_solver = system.stokes_solver(&base, None)?;
        Ok(Self {
            system,
            step_size,
            viscosity,
            base,
            base_solver,
            tolerance: 1e-13,
            max_sweeps: 60,
        })
    }

    /// Relative residual at which correction sweeps stop.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn system(&self) -> &FemSystem {
        self.system
    }

    pub fn step_size(&self) -> f64 {
        self.step_size
    }

    pub fn viscosity(&self) -> f64 {
        self.viscosity
    }

    /// One step from `u_prev` with noise load `(dW, phi_i e_c)`.
    pub fn step(&self, u_prev: &FemField, load: &[f64], convection: bool) -> Result<(FemField, FemPressure, FemStepStats)> {
        let sys = self.system;
        let nn = sys.nodes();
        let np = sys.pressure_dofs();
        if u_prev.values.len() != 2 * nn || load.len() != 2 * nn {
            return Err(Error::GridMismatch("velocity or load has the wrong size for the mesh".into()));
        }
        let mut rhs = vec![0.0; sys.saddle_dim()];
        for c in 0..2 {
            sys.mass().mul_vec_add(1.0, u_prev.component(c), &mut rhs[c * nn..(c + 1) * nn]);
        }
        for (r, l) in rhs.iter_mut().zip(load) {
            *r += l;
        }
        let scale = rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let (x, sweeps, refactored, residual) = if !convection {
            self.solve_with_correction(&self.base, &rhs, scale)?
        } else {
            let conv = sys.convection_matrix(u_prev);
            let block = self.base.add_same_pattern(self.step_size, &conv)?;
            self.solve_with_correction(&block, &rhs, scale)?
        };

        let velocity = FemField {
            values: x[..2 * nn].to_vec(),
        };
        let pressure = FemPressure {
            values: x[2 * nn..2 * nn + np].iter().map(|v| -v).collect(),
        };
        if velocity.values.iter().chain(&pressure.values).any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("non-finite values in finite-element step".into()));
        }
        let stats = FemStepStats {
            sweeps,
            refactored,
            linear_residual: residual,
            energy_residual: self.energy_residual(u_prev, load, &velocity),
            divergence_residual: sys.divergence_residual(&velocity),
        };
        Ok((velocity, pressure, stats))
    }

    fn solve_with_correction(&self, block: &CsrMatrix, rhs: &[f64], scale: f64) -> Result<(Vec<f64>, usize, bool, f64)> {
        let sys = self.system;
        if scale == 0.0 {
            return Ok((vec![0.0; rhs.len()], 0, false, 0.0));
        }
        let mut x = self.base_solver.solve(sys, rhs);
        let mut prev = f64::INFINITY;
        for sweep in 1..=self.max_sweeps {
            let ax = sys.saddle_apply(block, &x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let res = relative(r.iter().fold(0.0f64, |m, v| m.max(v.abs())), scale);
            if res <= self.tolerance {
                return Ok((x, sweep, false, res));
            }
            if res > 0.5 * prev {
                // a stall at roundoff level is convergence, anything else
                // means the convection is too strong for the base factors
                if res <= STALL_ACCEPT {
                    return Ok((x, sweep, false, res));
                }
                debug!("correction stalled at residual {res:.3e}; refactoring");
                break;
            }
            prev = res;
            let dx = self.base_solver.solve(sys, &r);
            for (a, d) in x.iter_mut().zip(&dx) {
                *a += d;
            }
        }
        let solver = sys.stokes_solver(block, Some(self.base_solver.symbolic()))?;
        let x = solver.solve(sys, rhs);
        let res = relative(residual_max(&sys.saddle_apply(block, &x), rhs), scale);
        Ok((x, 0, true, res))
    }

    /// `|U|^2 - |U_prev|^2 + |U - U_prev|^2 + 2 k nu |grad U|^2 - 2 (dW, U)`,
    /// zero for an exact solve because the convection form is skew.
    pub fn energy_residual(&self, u_prev: &FemField, load: &[f64], u: &FemField) -> f64 {
        let sys = self.system;
        let diff = u.difference(u_prev);
        let forcing: f64 = load.iter().zip(&u.values).map(|(a, b)| a * b).sum();
        sys.l2_norm_sq(u) - sys.l2_norm_sq(u_prev)
            + sys.l2_norm_sq(&diff)
            + 2.0 * self.step_size * self.viscosity * sys.h1_seminorm_sq(u)
            - 2.0 * forcing
    }
}

/// Relative residual below which a stalled correction is accepted.
const STALL_ACCEPT: f64 = 1e-10;

fn residual_max(ax: &[f64], b: &[f64]) -> f64 {
    ax.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

fn relative(r: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        r
    } else {
        r / scale
    }
}

/// Velocities `U^0..U^N`, pressures `Pi^1..Pi^N` and per-step diagnostics.
#[derive(Debug, Clone)]
pub struct FemTrajectory {
    pub step_size: f64,
    pub viscosity: f64,
    pub velocities: Vec<FemField>,
    pub pressures: Vec<FemPressure>,
    pub stats: Vec<FemStepStats>,
}

impl FemTrajectory {
    pub fn steps(&self) -> usize {
        self.stats.len()
    }

    pub fn last(&self) -> &FemField {
        self.velocities.last().expect("trajectory holds the initial state")
    }

    pub fn max_divergence_residual(&self) -> f64 {
        self.stats.iter().fold(0.0f64, |m, s| m.max(s.divergence_residual))
    }
}

/// Discrete initial value: nodal interpolation followed by `Q_h^0`.
pub fn fem_initial_value(system: &FemSystem, u0: &SpectralField) -> Result<FemField> {
    system.project_qh0(&system.interp_from_spectral(u0)?)
}

/// Runs the finite-element scheme on `steps` uniform steps driven by the
/// coarsened increments of `path`. Pressures are returned as `Pi = P / k`.
pub fn run_fem_scheme(
    system: &FemSystem,
    u0: &FemField,
    path: &NoisePath,
    steps: usize,
    viscosity: f64,
    convection: bool,
) -> Result<FemTrajectory> {
    let stepper = FemStepper::new(system, path.horizon() / steps as f64, viscosity)?;
    run_fem_with(&stepper, u0, path, convection)
}

/// [`run_fem_scheme`] with a prepared stepper, whose step size fixes the
/// number of steps.
pub fn run_fem_with(stepper: &FemStepper<'_>, u0: &FemField, path: &NoisePath, convection: bool) -> Result<FemTrajectory> {
    let system = stepper.system();
    if u0.values.len() != 2 * system.nodes() {
        return Err(Error::GridMismatch("initial value has the wrong size for the mesh".into()));
    }
    let k = stepper.step_size();
    let steps = (path.horizon() / k).round() as usize;
    if steps == 0 || ((steps as f64) * k - path.horizon()).abs() > 1e-12 * path.horizon() {
        return Err(Error::TimeGridMismatch(format!(
            "step size {k} does not divide the horizon {}",
            path.horizon()
        )));
    }
    let increments = path.increments(steps)?;
    let mut velocities = Vec::with_capacity(steps + 1);
    let mut pressures = Vec::with_capacity(steps);
    let mut stats = Vec::with_capacity(steps);
    velocities.push(u0.clone());
    for (l, dw) in increments.iter().enumerate() {
        let load = system.load_spectral(dw)?;
        let (u, p, s) = stepper
            .step(velocities.last().expect("nonempty"), &load, convection)
            .map_err(|e| match e {
                Error::LinearSolver(msg) => Error::LinearSolver(format!("step {}: {msg}", l + 1)),
                other => other,
            })?;
        velocities.push(u);
        pressures.push(FemPressure {
            values: p.values.iter().map(|v| v / k).collect(),
        });
        stats.push(s);
    }
    Ok(FemTrajectory {
        step_size: k,
        viscosity: stepper.viscosity(),
        velocities,
        pressures,
        stats,
    })
}
