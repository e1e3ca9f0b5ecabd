use std::io::Write;

use super::initial::InitialCondition;
use super::rate::{RateReport, RateRow};
use super::stats::{replicate_seed, run_replicates};
use crate::error::{Error, Result};
use crate::noise::{sample_path, QSpec};
use crate::scheme::{run_scheme, SchemeKind, SchemeParams, Trajectory};

/// Time-regularity functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegularityMode {
    /// Mean over `t` of `|u(t + tau) - u(t)|^2` for dyadic lags `tau`,
    /// measured against `tau`.
    L2,
    /// `sum_j int_{t_{j-1}}^{t_j} |u(s) - u(t_{j-1})|_V^2 + |u(s) - u(t_j)|_V^2 ds`
    /// for a coarse partition into `N` intervals (trapezoid rule on the
    /// fine grid), measured against `T / N`.
    V,
}

impl RegularityMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::L2 => "l2",
            Self::V => "v",
        }
    }
}

/// Dyadic levels below `steps` for `mode`: lags `1, 2, 4, ..` (up to a
/// quarter of the path) for [`RegularityMode::L2`], interval counts
/// `steps / 2, steps / 4, ..` (down to 4) for [`RegularityMode::V`].
pub fn dyadic_levels(mode: RegularityMode, steps: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut m = 1;
    match mode {
        RegularityMode::L2 => {
            while 4 * m <= steps {
                out.push(m);
                m *= 2;
            }
        }
        RegularityMode::V => {
            while steps % (2 * m) == 0 && steps / (2 * m) >= 4 {
                m *= 2;
                out.push(steps / m);
            }
            out.reverse();
        }
    }
    out
}

/// Lag functional of one trajectory at `lag` fine steps.
pub fn lag_increment(traj: &Trajectory, lag: usize) -> Result<f64> {
    let n = traj.steps();
    if lag == 0 || lag > n {
        return Err(Error::InvalidParameter(format!("lag {lag} outside 1..={n}")));
    }
    let s = traj.states();
    let count = n + 1 - lag;
    let sum: f64 = (0..count).map(|l| s[l + lag].difference(&s[l]).l2_norm_sq()).sum();
    Ok(sum / count as f64)
}

/// Partition functional of one trajectory for `coarse` intervals.
pub fn partition_increment(traj: &Trajectory, coarse: usize) -> Result<f64> {
    let n = traj.steps();
    if coarse == 0 || n % coarse != 0 {
        return Err(Error::TimeGridMismatch(format!("{coarse} intervals do not subdivide {n} steps")));
    }
    let r = n / coarse;
    let k = traj.step_size();
    let s = traj.states();
    let mut total = 0.0;
    for j in 0..coarse {
        let (a, b) = (&s[j * r], &s[(j + 1) * r]);
        for i in 0..=r {
            let u = &s[j * r + i];
            let g = u.difference(a).v_norm_sq() + u.difference(b).v_norm_sq();
            let w = if i == 0 || i == r { 0.5 } else { 1.0 };
            total += w * k * g;
        }
    }
    Ok(total)
}

fn functional(traj: &Trajectory, mode: RegularityMode, level: usize) -> Result<f64> {
    match mode {
        RegularityMode::L2 => lag_increment(traj, level),
        RegularityMode::V => partition_increment(traj, level),
    }
}

fn scale(mode: RegularityMode, level: usize, steps: usize, horizon: f64) -> f64 {
    match mode {
        RegularityMode::L2 => level as f64 * horizon / steps as f64,
        RegularityMode::V => horizon / level as f64,
    }
}

/// Report from per-replicate functional values `samples[replicate][level]`.
pub fn regularity_report(mode: RegularityMode, levels: &[usize], steps: usize, horizon: f64, samples: &[Vec<f64>]) -> RateReport {
    let rows = levels
        .iter()
        .enumerate()
        .map(|(i, &level)| {
            let values: Vec<Option<f64>> = samples.iter().map(|s| Some(s[i])).collect();
            let none = vec![None; values.len()];
            RateRow::from_samples(level, scale(mode, level, steps, horizon), &values, &none)
        })
        .collect();
    let var = match mode {
        RegularityMode::L2 => "lag",
        RegularityMode::V => "N",
    };
    RateReport::new(var, rows)
}

/// Monte Carlo regularity estimate over a set of trajectories on a common
/// fine grid; the fitted slope is the Holder-type exponent.
pub fn time_regularity_estimate(trajs: &[Trajectory], mode: RegularityMode, levels: &[usize]) -> Result<RateReport> {
    let first = trajs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no trajectories".into()))?;
    if trajs.iter().any(|t| t.steps() != first.steps() || t.horizon() != first.horizon()) {
        return Err(Error::TimeGridMismatch("trajectories use different time grids".into()));
    }
    let samples = trajs
        .iter()
        .map(|t| levels.iter().map(|&l| functional(t, mode, l)).collect())
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(regularity_report(mode, levels, first.steps(), first.horizon(), &samples))
}

/// Regularity of scheme trajectories on a fine grid, both modes at their
/// dyadic levels, without keeping the trajectories.
#[derive(Debug, Clone)]
pub struct RegularitySweep {
    pub viscosity: f64,
    pub horizon: f64,
    pub noise: QSpec,
    pub initial: InitialCondition,
    /// Fine step count (a power of two, at least 16).
    pub steps: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub scheme: SchemeKind,
    pub convection: bool,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl RegularitySweep {
    /// `(L2 report, V report)`.
    pub fn run(&self) -> Result<(RateReport, RateReport)> {
        if !self.steps.is_power_of_two() || self.steps < 16 {
            return Err(Error::InvalidParameter(format!(
                "regularity runs need a power-of-two step count of at least 16, got {}",
                self.steps
            )));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidParameter("at least two replicates are required".into()));
        }
        let p = SchemeParams::new(self.viscosity, self.horizon, self.steps, self.scheme)?
            .with_tolerance(self.tolerance, self.max_iter)?;
        let p = if self.convection { p } else { p.without_convection() };
        let modes = [RegularityMode::L2, RegularityMode::V];
        let levels = modes.map(|m| dyadic_levels(m, self.steps));
        let per_rep: Vec<[Vec<f64>; 2]> = run_replicates(self.replicates, |i| -> Result<[Vec<f64>; 2]> {
            let seed = replicate_seed(self.master_seed, i as u64);
            let path = sample_path(&self.noise, self.steps, self.horizon, seed)?;
            let u0 = self.initial.sample(*self.noise.grid(), seed)?;
            let traj = if self.scheme == SchemeKind::OuExact {
                crate::scheme::ou_exact_trajectory(&u0, &path, &p)?
            } else {
                run_scheme(&u0, &path, &p)?
            };
            let mut out = [Vec::new(), Vec::new()];
            for (j, m) in modes.iter().enumerate() {
                out[j] = levels[j].iter().map(|&l| functional(&traj, *m, l)).collect::<Result<_>>()?;
            }
            Ok(out)
        })
        .into_iter()
        .collect::<Result<_>>()?;
        let split = |j: usize| -> Vec<Vec<f64>> { per_rep.iter().map(|r| r[j].clone()).collect() };
        Ok((
            regularity_report(RegularityMode::L2, &levels[0], self.steps, self.horizon, &split(0)),
            regularity_report(RegularityMode::V, &levels[1], self.steps, self.horizon, &split(1)),
        ))
    }
}

/// `regularity.csv`: one row per level and mode, fitted exponents in
/// trailing comment lines.
pub fn write_regularity_csv<W: Write>(mut w: W, reports: &[(RegularityMode, &RateReport)]) -> Result<()> {
    writeln!(w, "mode,level,scale,mean,ci_half,replicates")?;
    for (mode, report) in reports {
        for r in &report.rows {
            let (mean, ci) = r
                .l2
                .map_or(("nan".to_string(), "nan".to_string()), |e| {
                    (format!("{:.10e}", e.mean), format!("{:.10e}", e.ci_half))
                });
            writeln!(w, "{},{},{:.10e},{},{},{}", mode.name(), r.level, r.scale, mean, ci, r.replicates)?;
        }
    }
    for (mode, report) in reports {
        match report.slope() {
            Some(s) => writeln!(w, "# exponent {}: {s:.6}", mode.name())?,
            None => writeln!(w, "# exponent {}: unavailable", mode.name())?,
        }
    }
    Ok(())
}
