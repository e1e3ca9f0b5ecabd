//! Validation of the linear (convection-free) problem against its exact
//! Ornstein-Uhlenbeck solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::rate::{fit_rate, RateFit};
use super::stats::{replicate_seed, run_replicates, McEstimate};
use super::sweep::{SweepOutcome, TimeSweep};
use crate::error::{Error, Result};
use crate::noise::{sample_path, QSpec};
use crate::scheme::{ou_exact_trajectory, SchemeKind, SchemeParams};
use crate::spectral::SpectralField;
use crate::util::mean_sd;

/// One real coordinate of the linear problem: `dX = -rate X dt + sqrt(q) dbeta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuChannel {
    pub k: (i64, i64),
    /// `0` cosine, `1` sine.
    pub channel: usize,
    pub q: f64,
    pub rate: f64,
    pub x0: f64,
}

/// Real channel coordinates of `f` at half mode `k`, scaled so that
/// `|f|^2` is the sum of their squares.
pub fn channel_values(f: &SpectralField, k1: i64, k2: i64) -> [f64; 2] {
    let grid = f.grid();
    let e = grid.solenoidal_direction(k1, k2);
    let c = f.coefficient(k1, k2);
    let s = c[0] * e[0] + c[1] * e[1];
    let norm = std::f64::consts::SQRT_2 * grid.length();
    [norm * s.re, -norm * s.im]
}

/// Channels carrying noise or initial data.
pub fn ou_channels(u0: &SpectralField, noise: &QSpec, viscosity: f64) -> Vec<OuChannel> {
    let grid = noise.grid();
    let mut out = Vec::new();
    for (k1, k2) in grid.half_modes() {
        let q = noise.variance(k1, k2);
        let x0 = channel_values(u0, k1, k2);
        for (channel, &x) in x0.iter().enumerate() {
            if q > 0.0 || x != 0.0 {
                out.push(OuChannel {
                    k: (k1, k2),
                    channel,
                    q,
                    rate: viscosity * grid.eigenvalue(k1, k2),
                    x0: x,
                });
            }
        }
    }
    out
}

/// Brute-force Monte Carlo of the implicit Euler error on scalar
/// recursions, independent of the spectral code: each channel is advanced
/// exactly on `fine_steps` steps (joint Gaussian law of the Brownian and
/// convolution increments) next to `y_l = (y_{l-1} + sqrt(q) dB) / (1 + rate k)`.
/// Returns per level the estimates of `E max_l sum_c e_c(t_l)^2` and
/// `E k sum_l sum_c rate e_c(t_l)^2`.
pub fn scalar_oracle_errors(
    channels: &[OuChannel],
    horizon: f64,
    fine_steps: usize,
    levels: &[usize],
    replicates: usize,
    seed: u64,
) -> Result<Vec<(McEstimate, McEstimate)>> {
    if let Some(&bad) = levels.iter().find(|&&n| n == 0 || fine_steps % n != 0) {
        return Err(Error::InvalidParameter(format!("level {bad} does not divide {fine_steps} fine steps")));
    }
    if replicates < 2 {
        return Err(Error::InvalidParameter("the oracle needs at least two replicates".into()));
    }
    let delta = horizon / fine_steps as f64;
    // per channel: decay, Brownian-coefficient and independent part of the
    // convolution increment
    let laws: Vec<(f64, f64, f64)> = channels
        .iter()
        .map(|c| {
            let a = c.rate;
            if a == 0.0 {
                return (1.0, 1.0, 0.0);
            }
            let var_i = -(-2.0 * a * delta).exp_m1() / (2.0 * a);
            let cov = -(-a * delta).exp_m1() / a;
            let beta = cov / delta;
            ((-a * delta).exp(), beta, (var_i - beta * cov).max(0.0).sqrt())
        })
        .collect();
    let per_rep: Vec<Vec<(f64, f64)>> = run_replicates(replicates, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(r as u64);
        let mut sq: Vec<Vec<f64>> = levels.iter().map(|&n| vec![0.0; n + 1]).collect();
        let mut diss = vec![0.0; levels.len()];
        let sd = delta.sqrt();
        for (c, &(decay, beta, indep)) in channels.iter().zip(&laws) {
            let sq_q = c.q.sqrt();
            let mut x = c.x0;
            let mut y = vec![c.x0; levels.len()];
            let mut acc = vec![0.0; levels.len()];
            for j in 0..fine_steps {
                let g1: f64 = rng.sample(StandardNormal);
                let g2: f64 = rng.sample(StandardNormal);
                let db = sd * g1;
                x = decay * x + sq_q * (beta * db + indep * g2);
                for (li, &n) in levels.iter().enumerate() {
                    acc[li] += db;
                    let ratio = fine_steps / n;
                    if (j + 1) % ratio == 0 {
                        let k = horizon / n as f64;
                        y[li] = (y[li] + sq_q * acc[li]) / (1.0 + c.rate * k);
                        acc[li] = 0.0;
                        let e = x - y[li];
                        sq[li][(j + 1) / ratio] += e * e;
                        diss[li] += k * c.rate * e * e;
                    }
                }
            }
        }
        sq.iter()
            .zip(&diss)
            .map(|(s, &d)| (s[1..].iter().copied().fold(0.0, f64::max), d))
            .collect()
    });
    Ok((0..levels.len())
        .map(|li| {
            let l2: Vec<f64> = per_rep.iter().map(|r| r[li].0).collect();
            let v: Vec<f64> = per_rep.iter().map(|r| r[li].1).collect();
            (
                McEstimate::from_values(&l2).expect("at least two replicates"),
                McEstimate::from_values(&v).expect("at least two replicates"),
            )
        })
        .collect())
}

/// Marginal-variance comparison of the exact trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceCheck {
    pub checks: usize,
    /// Largest `|empirical - exact| / standard error`.
    pub worst_z: f64,
    pub worst: Option<(OuChannel, f64)>,
    pub failures: usize,
}

/// Outcome of the linear-problem validation suite.
#[derive(Debug, Clone)]
pub struct OuValidation {
    pub variance: VarianceCheck,
    pub sweep: SweepOutcome,
    pub oracle: Vec<(McEstimate, McEstimate)>,
    pub oracle_fit: Option<RateFit>,
}

impl OuValidation {
    pub fn scheme_slope(&self) -> Option<f64> {
        self.sweep.report.slope()
    }

    pub fn oracle_slope(&self) -> Option<f64> {
        self.oracle_fit.map(|f| f.slope)
    }

    pub fn slope_gap(&self) -> Option<f64> {
        Some((self.scheme_slope()? - self.oracle_slope()?).abs())
    }
}

/// Checks `Var X(t_l) = q (1 - e^{-2 a t}) / (2 a)` (around the decayed
/// initial value) for every channel at the times of `check_steps`, with
/// `z`-scores against the Monte Carlo standard error; failures count
/// `z > z_max`.
pub fn check_ou_variances(sweep: &TimeSweep, check_steps: usize, z_max: f64) -> Result<VarianceCheck> {
    if sweep.initial.is_random() {
        return Err(Error::InvalidParameter("the variance check needs a deterministic initial value".into()));
    }
    let grid = *sweep.noise.grid();
    let u0 = sweep.initial.sample(grid, 0)?;
    let channels = ou_channels(&u0, &sweep.noise, sweep.viscosity);
    let p = SchemeParams::new(sweep.viscosity, sweep.horizon, check_steps, SchemeKind::OuExact)?.without_convection();
    let finals: Vec<Vec<Vec<f64>>> = run_replicates(sweep.replicates, |i| {
        let seed = replicate_seed(sweep.master_seed, i as u64);
        let path = sample_path(&sweep.noise, sweep.reference_steps, sweep.horizon, seed)?;
        let t = ou_exact_trajectory(&u0, &path, &p)?;
        Ok(t.states()[1..]
            .iter()
            .map(|s| channels.iter().map(|c| channel_values(s, c.k.0, c.k.1)[c.channel]).collect())
            .collect())
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut out = VarianceCheck {
        checks: 0,
        worst_z: 0.0,
        worst: None,
        failures: 0,
    };
    let count = finals.len() as f64;
    for l in 0..check_steps {
        let t = sweep.horizon * (l + 1) as f64 / check_steps as f64;
        for (ci, c) in channels.iter().enumerate() {
            if c.q == 0.0 {
                continue;
            }
            let mean = (-c.rate * t).exp() * c.x0;
            let d: Vec<f64> = finals.iter().map(|r| (r[l][ci] - mean).powi(2)).collect();
            let (m, sd) = mean_sd(&d).ok_or_else(|| Error::InvalidParameter("need two replicates".into()))?;
            let exact = crate::scheme::ou_variance(c.q, c.rate, t);
            let z = (m - exact).abs() / (sd / count.sqrt());
            out.checks += 1;
            if z > z_max {
                out.failures += 1;
            }
            if z > out.worst_z {
                out.worst_z = z;
                out.worst = Some((*c, t));
            }
        }
    }
    Ok(out)
}

/// Runs the variance check, the implicit-versus-exact sweep and the scalar
/// oracle on the same configuration.
pub fn validate_ou(sweep: &TimeSweep, oracle_replicates: usize, check_steps: usize) -> Result<OuValidation> {
    if sweep.convection || sweep.reference != SchemeKind::OuExact {
        return Err(Error::InvalidParameter(
            "linear validation needs convection off and the exact reference".into(),
        ));
    }
    let variance = check_ou_variances(sweep, check_steps, 5.0)?;
    let outcome = sweep.run()?;
    let u0 = sweep.initial.sample(*sweep.noise.grid(), 0)?;
    let channels = ou_channels(&u0, &sweep.noise, sweep.viscosity);
    let oracle = scalar_oracle_errors(
        &channels,
        sweep.horizon,
        sweep.reference_steps,
        &sweep.levels,
        oracle_replicates,
        replicate_seed(sweep.master_seed, u64::MAX),
    )?;
    let pts: Vec<(f64, f64, f64)> = sweep
        .levels
        .iter()
        .zip(&oracle)
        .map(|(&n, (e, _))| {
            let rel = e.relative_half_width();
            (sweep.horizon / n as f64, e.mean, if rel > 0.0 { 1.0 / (rel * rel) } else { 1.0 })
        })
        .collect();
    Ok(OuValidation {
        variance,
        sweep: outcome,
        oracle,
        oracle_fit: fit_rate(&pts).ok(),
    })
}
