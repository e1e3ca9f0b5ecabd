use num_complex::Complex64;

use super::params::{SchemeKind, SchemeParams};
use super::step::StepStats;
use super::trajectory::Trajectory;
use crate::error::{Error, Result};
use crate::noise::NoisePath;
use crate::spectral::SpectralField;

/// Coefficients of the exact Ornstein-Uhlenbeck step over one interval of
/// length `delta` with rate `a`:
/// `z(t + delta) = decay z(t) + c1 dbeta + c2 xi` with `xi` standard normal
/// independent of the Brownian increment `dbeta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuStep {
    pub decay: f64,
    pub c1: f64,
    pub c2: f64,
}

impl OuStep {
    pub fn new(a: f64, delta: f64) -> Self {
        let x = a * delta;
        if x == 0.0 {
            return Self {
                decay: 1.0,
                c1: 1.0,
                c2: 0.0,
            };
        }
        let decay = (-x).exp();
        // c1 = Cov(I, dbeta) / delta, c2^2 = Var(I) - Cov^2 / delta where
        // I = int_0^delta e^{-a (delta - s)} dbeta(s)
        let c1 = -(-x).exp_m1() / x;
        let f = if x < 1e-3 {
            x * x / 12.0 - x.powi(3) / 12.0 + 17.0 * x.powi(4) / 360.0 - 7.0 * x.powi(5) / 360.0
                + 43.0 * x.powi(6) / 6720.0
        } else {
            -(-2.0 * x).exp_m1() / (2.0 * x) - c1 * c1
        };
        Self {
            decay,
            c1,
            c2: (delta * f.max(0.0)).sqrt(),
        }
    }
}

/// Variance at time `t` of a mode started at zero: `q (1 - e^{-2 a t}) / (2 a)`.
pub fn ou_variance(q: f64, a: f64, t: f64) -> f64 {
    if a == 0.0 {
        q * t
    } else {
        -q * (-2.0 * a * t).exp_m1() / (2.0 * a)
    }
}

/// Exact solution of the linear stochastic Stokes problem driven by `path`,
/// advanced on the fine grid of the path and sampled at `p.steps` times.
pub fn ou_exact_trajectory(u0: &SpectralField, path: &NoisePath, p: &SchemeParams) -> Result<Trajectory> {
    p.validate()?;
    u0.check_same_grid(&SpectralField::zeros(*path.grid()))?;
    if p.horizon != path.horizon() {
        return Err(Error::TimeGridMismatch(format!(
            "scheme horizon {} differs from noise horizon {}",
            p.horizon,
            path.horizon()
        )));
    }
    let ratio = path.coarsening_ratio(p.steps)?;
    let grid = *path.grid();
    let n_fine = path.fine_steps();
    let delta = path.horizon() / n_fine as f64;
    let norm = std::f64::consts::SQRT_2 * grid.length();
    let mut states = vec![SpectralField::zeros(grid); p.steps + 1];
    states[0] = u0.clone();
    for &(k1, k2) in path.half_modes() {
        let e = grid.solenoidal_direction(k1, k2);
        let c = u0.coefficient(k1, k2);
        let mut s = c[0] * e[0] + c[1] * e[1];
        let q = path.qspec().variance(k1, k2);
        let step = OuStep::new(p.viscosity * grid.eigenvalue(k1, k2), delta);
        let noise = if q > 0.0 {
            let sq = q.sqrt() / norm;
            Some((
                sq,
                path.fine_channel(k1, k2, 0).unwrap(),
                path.fine_channel(k1, k2, 1).unwrap(),
                path.auxiliary_normals(k1, k2, 0),
                path.auxiliary_normals(k1, k2, 1),
            ))
        } else {
            None
        };
        if s == Complex64::new(0.0, 0.0) && noise.is_none() {
            continue;
        }
        for j in 0..n_fine {
            s *= step.decay;
            if let Some((sq, bc, bs, xc, xs)) = &noise {
                let a = step.c1 * bc[j] + step.c2 * xc[j];
                let b = step.c1 * bs[j] + step.c2 * xs[j];
                s += Complex64::new(sq * a, -sq * b);
            }
            if (j + 1) % ratio == 0 {
                states[(j + 1) / ratio].set_pair(k1, k2, [s * e[0], s * e[1]]);
            }
        }
    }
    let stats = vec![
        StepStats {
            iterations: 0,
            fixed_point_residual: 0.0,
            energy_residual: f64::NAN,
        };
        p.steps
    ];
    Ok(Trajectory::new(
        SchemeKind::OuExact,
        false,
        p.viscosity,
        p.horizon,
        path.seed(),
        states,
        stats,
    ))
}
