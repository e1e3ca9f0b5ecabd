use super::params::SchemeParams;
use crate::error::{Error, Result};
use crate::spectral::{advection, bilinear, SpectralField};

/// Per-step solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    /// Fixed-point sweeps performed (zero for the exact linear solution).
    pub iterations: usize,
    /// V norm of the last fixed-point update.
    pub fixed_point_residual: f64,
    /// `|u|^2 - |u_prev|^2 + |u - u_prev|^2 + 2 k nu |A^{1/2} u|^2 - 2 (dW, u)`.
    pub energy_residual: f64,
}

/// Residual of the discrete energy balance obtained by testing a backward
/// Euler step with the new state.
pub fn energy_residual(u_prev: &SpectralField, dw: &SpectralField, u: &SpectralField, k: f64, nu: f64) -> f64 {
    let jump = u.difference(u_prev);
    u.l2_norm_sq() - u_prev.l2_norm_sq() + jump.l2_norm_sq() + 2.0 * k * nu * u.v_norm_sq()
        - 2.0 * dw.inner(u)
}

fn resolvent(f: &mut SpectralField, k: f64, nu: f64) {
    f.map_diagonal_mut(|lam| 1.0 / (1.0 + k * nu * lam));
}

/// Damped Picard iteration for `v = (I + k nu A)^{-1} (rhs - k conv(v))`.
/// The damping factor halves whenever the update grows.
fn fixed_point(
    u_prev: &SpectralField,
    dw: &SpectralField,
    p: &SchemeParams,
    conv: impl Fn(&SpectralField) -> Result<SpectralField>,
) -> Result<(SpectralField, StepStats)> {
    p.validate()?;
    u_prev.check_same_grid(dw)?;
    let k = p.step_size();
    let nu = p.viscosity;
    let mut rhs = u_prev.clone();
    rhs.axpy(1.0, dw);
    if !p.convection {
        let mut u = rhs;
        resolvent(&mut u, k, nu);
        let energy = energy_residual(u_prev, dw, &u, k, nu);
        return Ok((
            u,
            StepStats {
                iterations: 1,
                fixed_point_residual: 0.0,
                energy_residual: energy,
            },
        ));
    }
    let mut v = u_prev.clone();
    let mut theta = 1.0;
    let mut last = f64::INFINITY;
    for it in 1..=p.max_iter {
        let mut g = rhs.clone();
        g.axpy(-k, &conv(&v)?);
        resolvent(&mut g, k, nu);
        let update = g.difference(&v);
        let res = update.v_norm_sq().sqrt();
        if !res.is_finite() {
            break;
        }
        if res > last {
            theta *= 0.5;
        }
        last = res;
        v.axpy(theta, &update);
        if res < p.tol {
            let energy = energy_residual(u_prev, dw, &v, k, nu);
            return Ok((
                v,
                StepStats {
                    iterations: it,
                    fixed_point_residual: res,
                    energy_residual: energy,
                },
            ));
        }
    }
    Err(Error::NonConvergence {
        step: 0,
        iterations: p.max_iter,
        residual: last,
    })
}

/// One step of the fully implicit scheme:
/// `(I + k nu A) u + k B(u, u) = u_prev + dW`.
pub fn implicit_step_with_stats(
    u_prev: &SpectralField,
    dw: &SpectralField,
    p: &SchemeParams,
) -> Result<(SpectralField, StepStats)> {
    fixed_point(u_prev, dw, p, |v| bilinear(v, v))
}

pub fn implicit_step(u_prev: &SpectralField, dw: &SpectralField, p: &SchemeParams) -> Result<SpectralField> {
    implicit_step_with_stats(u_prev, dw, p).map(|(u, _)| u)
}

/// One linearized step: `(I + k nu A) u + k B(u_prev, u) = u_prev + dW`.
pub fn semi_implicit_step_with_stats(
    u_prev: &SpectralField,
    dw: &SpectralField,
    p: &SchemeParams,
) -> Result<(SpectralField, StepStats)> {
    fixed_point(u_prev, dw, p, |v| bilinear(u_prev, v))
}

pub fn semi_implicit_step(u_prev: &SpectralField, dw: &SpectralField, p: &SchemeParams) -> Result<SpectralField> {
    semi_implicit_step_with_stats(u_prev, dw, p).map(|(u, _)| u)
}

/// Pressure gradient consistent with a velocity state: the part of
/// `-(u . grad) u` removed by the Leray projection.
pub fn pressure_gradient(u: &SpectralField) -> Result<SpectralField> {
    Ok(advection(u, u)?.gradient_part().scaled(-1.0))
}
