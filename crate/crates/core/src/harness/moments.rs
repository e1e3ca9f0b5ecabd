use std::io::Write;

use log::warn;

use super::initial::InitialCondition;
use super::stats::{replicate_seed, run_replicates, McEstimate};
use crate::error::{Error, Result};
use crate::fem::{fem_initial_value, run_fem_with, FemStepper, FemSystem, FemTrajectory, PeriodicMesh};
use crate::noise::{sample_path, QSpec};
use crate::scheme::{pressure_gradient, run_scheme, SchemeKind, SchemeParams, Trajectory};

/// Moment functionals of the spectral scheme for exponent `q`, all with
/// `|v|_V = |A^{1/2} v|`:
/// `max_l |u^l|_V^q`, `2 nu k sum |u^l|_V^{q-2} |A u^l|^2`,
/// `sum |u^l - u^{l-1}|_V^2 |u^l|_V^2`, `(sum |u^l - u^{l-1}|_V^2)^q`,
/// `(nu k sum |A u^l|^2)^q` and the pressure `(k sum |grad pi^l|^2)^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralMoments {
    pub max_v: f64,
    pub weighted_dissipation: f64,
    pub increment_energy: f64,
    pub increments: f64,
    pub dissipation: f64,
    pub pressure: f64,
}

pub const SPECTRAL_FUNCTIONALS: [&str; 6] = [
    "max-v",
    "weighted-dissipation",
    "increment-energy",
    "increments",
    "dissipation",
    "pressure",
];

impl SpectralMoments {
    pub fn of(traj: &Trajectory, q: f64) -> Result<Self> {
        let k = traj.step_size();
        let nu = traj.viscosity();
        let states = traj.states();
        let v: Vec<f64> = states.iter().map(|u| u.v_norm_sq()).collect();
        let a: Vec<f64> = states.iter().map(|u| u.sobolev_norm_sq(2.0)).collect();
        let max_v = v.iter().fold(0.0f64, |m, x| m.max(*x)).powf(0.5 * q);
        let mut weighted = 0.0;
        let mut inc_energy = 0.0;
        let mut inc = 0.0;
        let mut diss = 0.0;
        let mut pressure = 0.0;
        for l in 1..states.len() {
            weighted += 2.0 * nu * k * v[l].powf(0.5 * q - 1.0) * a[l];
            let d = states[l].difference(&states[l - 1]).v_norm_sq();
            inc_energy += d * v[l];
            inc += d;
            diss += nu * k * a[l];
            pressure += k * pressure_gradient(&states[l])?.l2_norm_sq();
        }
        Ok(Self {
            max_v,
            weighted_dissipation: weighted,
            increment_energy: inc_energy,
            increments: inc.powf(q),
            dissipation: diss.powf(q),
            pressure: pressure.powf(q),
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.max_v,
            self.weighted_dissipation,
            self.increment_energy,
            self.increments,
            self.dissipation,
            self.pressure,
        ]
    }
}

/// Finite-element moment functionals for exponent `p`:
/// `max_l |U^l|^p + nu k sum |U^l|^{p-2} |grad U^l|^2`,
/// `(k sum |grad U^l|^2)^{p/2}` and the pressure `(k sum |grad Pi^l|^2)^{p/2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemMoments {
    pub energy: f64,
    pub gradient: f64,
    pub pressure: f64,
}

pub const FEM_FUNCTIONALS: [&str; 3] = ["fem-energy", "fem-gradient", "fem-pressure"];

impl FemMoments {
    pub fn of(traj: &FemTrajectory, system: &FemSystem, p: f64) -> Self {
        let k = traj.step_size;
        let nu = traj.viscosity;
        let l2: Vec<f64> = traj.velocities.iter().map(|u| system.l2_norm_sq(u)).collect();
        let mut weighted = 0.0;
        let mut grad = 0.0;
        for (l, u) in traj.velocities.iter().enumerate().skip(1) {
            let g = system.h1_seminorm_sq(u);
            weighted += nu * k * l2[l].powf(0.5 * p - 1.0) * g;
            grad += k * g;
        }
        let pressure: f64 = traj.pressures.iter().map(|pi| k * system.pressure_gradient_norm_sq(pi)).sum();
        Self {
            energy: l2.iter().fold(0.0f64, |m, x| m.max(*x)).powf(0.5 * p) + weighted,
            gradient: grad.powf(0.5 * p),
            pressure: pressure.powf(0.5 * p),
        }
    }

    pub fn values(&self) -> [f64; 3] {
        [self.energy, self.gradient, self.pressure]
    }
}

/// One Monte Carlo moment estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRow {
    pub functional: String,
    pub exponent: f64,
    pub steps: usize,
    /// Mesh subdivisions for finite-element functionals.
    pub mesh: Option<usize>,
    pub estimate: Option<McEstimate>,
    pub replicates: usize,
    pub invalid: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentReport {
    pub rows: Vec<MomentRow>,
}

impl MomentReport {
    pub fn functionals(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.functional.as_str()) {
                out.push(&r.functional);
            }
        }
        out
    }

    /// Largest over smallest mean of a functional across its levels
    /// (infinite if some level has no estimate or a zero mean).
    pub fn spread(&self, functional: &str) -> f64 {
        let means: Vec<Option<f64>> = self
            .rows
            .iter()
            .filter(|r| r.functional == functional)
            .map(|r| r.estimate.map(|e| e.mean))
            .collect();
        if means.is_empty() || means.iter().any(|m| m.is_none()) {
            return f64::INFINITY;
        }
        let means: Vec<f64> = means.into_iter().flatten().collect();
        let hi = means.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        let lo = means.iter().fold(f64::INFINITY, |a, b| a.min(*b));
        if hi == 0.0 {
            1.0
        } else if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// `moments.csv`; the spread of each functional goes into trailing
    /// comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "functional,exponent,N,n,mean,ci_half,replicates,invalid")?;
        for r in &self.rows {
            let (mean, ci) = r
                .estimate
                .map_or(("nan".to_string(), "nan".to_string()), |e| {
                    (format!("{:.10e}", e.mean), format!("{:.10e}", e.ci_half))
                });
            let mesh = r.mesh.map_or(String::new(), |n| n.to_string());
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.functional, r.exponent, r.steps, mesh, mean, ci, r.replicates, r.invalid
            )?;
        }
        for f in self.functionals() {
            writeln!(w, "# spread {f}: {:.6}", self.spread(f))?;
        }
        Ok(())
    }
}

/// Moment estimates across step counts for the spectral scheme and,
/// optionally, across meshes and step counts for the finite-element scheme.
#[derive(Debug, Clone)]
pub struct MomentSweep {
    pub viscosity: f64,
    pub horizon: f64,
    pub noise: QSpec,
    pub initial: InitialCondition,
    /// Spectral step counts; the largest must be a power of two divisible
    /// by the others.
    pub steps: Vec<usize>,
    pub exponent: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub scheme: SchemeKind,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Finite-element mesh levels (empty to skip).
    pub fem_meshes: Vec<usize>,
    /// Finite-element step counts (dividing the largest spectral count).
    pub fem_steps: Vec<usize>,
}

impl MomentSweep {
    fn fine_steps(&self) -> usize {
        self.steps.iter().chain(&self.fem_steps).copied().max().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let fine = self.fine_steps();
        if self.steps.is_empty() || !fine.is_power_of_two() {
            return Err(Error::InvalidParameter("moment sweeps need step counts with a power-of-two maximum".into()));
        }
        if let Some(&bad) = self.steps.iter().chain(&self.fem_steps).find(|&&n| n == 0 || fine % n != 0) {
            return Err(Error::InvalidParameter(format!("step count {bad} does not divide {fine}")));
        }
        if !(self.exponent >= 2.0 && self.exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!("moment exponent must be at least 2, got {}", self.exponent)));
        }
        if self.replicates < 2 {
            return Err(Error::InvalidParameter("at least two replicates are required".into()));
        }
        if self.scheme == SchemeKind::OuExact {
            return Err(Error::InvalidParameter("moments are estimated for the implicit or semi-implicit scheme".into()));
        }
        if self.fem_meshes.is_empty() != self.fem_steps.is_empty() {
            return Err(Error::InvalidParameter("finite-element meshes and step counts go together".into()));
        }
        self.initial.validate(self.noise.grid())
    }

    pub fn run(&self) -> Result<MomentReport> {
        self.validate()?;
        let systems: Vec<FemSystem> = self
            .fem_meshes
            .iter()
            .map(|&n| Ok(FemSystem::new(PeriodicMesh::new(self.noise.grid().length(), n)?)))
            .collect::<Result<_>>()?;
        let mut steppers = Vec::new();
        for sys in &systems {
            for &n in &self.fem_steps {
                steppers.push(FemStepper::new(sys, self.horizon / n as f64, self.viscosity)?);
            }
        }
        let fine = self.fine_steps();
        type Sample = (Vec<Option<[f64; 6]>>, Vec<Option<[f64; 3]>>);
        let samples: Vec<Sample> = run_replicates(self.replicates, |i| -> Result<Sample> {
            let seed = replicate_seed(self.master_seed, i as u64);
            let path = sample_path(&self.noise, fine, self.horizon, seed)?;
            let u0 = self.initial.sample(*self.noise.grid(), seed)?;
            let mut spectral = Vec::with_capacity(self.steps.len());
            for &n in &self.steps {
                let p = SchemeParams::new(self.viscosity, self.horizon, n, self.scheme)?
                    .with_tolerance(self.tolerance, self.max_iter)?;
                spectral.push(match run_scheme(&u0, &path, &p) {
                    Ok(t) => Some(SpectralMoments::of(&t, self.exponent)?.values()),
                    Err(e @ Error::NonConvergence { .. }) => {
                        warn!("replicate {i}, N = {n}: {e}");
                        None
                    }
                    Err(e) => return Err(e),
                });
            }
            let mut fem = Vec::with_capacity(steppers.len());
            for st in &steppers {
                let sys = st.system();
                let start = fem_initial_value(sys, &u0)?;
                fem.push(match run_fem_with(st, &start, &path, true) {
                    Ok(t) => Some(FemMoments::of(&t, sys, self.exponent).values()),
                    Err(e @ Error::LinearSolver(_)) => {
                        warn!("replicate {i}, n = {}: {e}", sys.mesh().subdivisions());
                        None
                    }
                    Err(e) => return Err(e),
                });
            }
            Ok((spectral, fem))
        })
        .into_iter()
        .collect::<Result<_>>()?;

        let mut rows = Vec::new();
        let row = |name: &str, steps: usize, mesh: Option<usize>, vals: Vec<Option<f64>>| {
            let ok: Vec<f64> = vals.iter().flatten().copied().collect();
            MomentRow {
                functional: name.to_string(),
                exponent: self.exponent,
                steps,
                mesh,
                estimate: McEstimate::from_values(&ok),
                replicates: vals.len(),
                invalid: vals.len() - ok.len(),
            }
        };
        for (fi, name) in SPECTRAL_FUNCTIONALS.iter().enumerate() {
            for (li, &n) in self.steps.iter().enumerate() {
                let vals = samples.iter().map(|s| s.0[li].map(|v| v[fi])).collect();
                rows.push(row(name, n, None, vals));
            }
        }
        for (fi, name) in FEM_FUNCTIONALS.iter().enumerate() {
            for (mi, &mesh) in self.fem_meshes.iter().enumerate() {
                for (si, &n) in self.fem_steps.iter().enumerate() {
                    let idx = mi * self.fem_steps.len() + si;
                    let vals = samples.iter().map(|s| s.1[idx].map(|v| v[fi])).collect();
                    rows.push(row(name, n, Some(mesh), vals));
                }
            }
        }
        Ok(MomentReport { rows })
    }
}

/// Functional inside an exponential moment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpFunctional {
    /// `max_l |A^{1/2} u^l|^2`.
    SupV,
    /// `max_n [|A^{1/2} u^n|^2 + beta nu k sum_{l <= n} |A u^l|^2]` with
    /// `beta` the exponent parameter itself.
    SupVDissipation,
}

impl ExpFunctional {
    pub fn name(self) -> &'static str {
        match self {
            Self::SupV => "sup-v",
            Self::SupVDissipation => "sup-v-dissipation",
        }
    }

    pub fn evaluate(self, traj: &Trajectory, alpha: f64) -> f64 {
        let v = traj.states().iter().map(|u| u.v_norm_sq());
        match self {
            Self::SupV => v.fold(0.0, f64::max),
            Self::SupVDissipation => {
                let c = alpha * traj.viscosity() * traj.step_size();
                let mut acc = 0.0;
                let mut best = 0.0f64;
                for (l, (vl, u)) in v.zip(traj.states()).enumerate() {
                    if l > 0 {
                        acc += c * u.sobolev_norm_sq(2.0);
                    }
                    best = best.max(vl + acc);
                }
                best
            }
        }
    }
}

/// `E exp(alpha F)` with tail diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpMomentEstimate {
    pub alpha: f64,
    /// `log` of the sample mean, computed by log-sum-exp.
    pub log_mean: f64,
    pub mean: f64,
    pub ci_half: f64,
    pub count: usize,
    /// Largest functional value.
    pub max_functional: f64,
    /// Share of the sum carried by the largest sample.
    pub max_share: f64,
    /// Set when one sample carries more than half of the sum.
    pub dominated: bool,
}

/// Estimate of `E exp(alpha F)` from samples of `F`. The mean is formed in
/// log-sum-exp form so large `alpha F` do not overflow until the final
/// exponentiation.
pub fn exp_moment_from_values(values: &[f64], alpha: f64) -> Result<ExpMomentEstimate> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponential-moment parameter must be nonnegative, got {alpha}")));
    }
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("exponential moment needs finite samples".into()));
    }
    let n = values.len() as f64;
    let top = values.iter().map(|v| alpha * v).fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = values.iter().map(|v| (alpha * v - top).exp()).collect();
    let sum: f64 = crate::util::pairwise_sum(&w);
    let mean_w = sum / n;
    let log_mean = top + mean_w.ln();
    let var_w = if values.len() > 1 {
        w.iter().map(|x| (x - mean_w).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        f64::INFINITY
    };
    let scale = top.exp();
    let max_share = 1.0 / sum;
    Ok(ExpMomentEstimate {
        alpha,
        log_mean,
        mean: log_mean.exp(),
        ci_half: scale * super::stats::Z95 * (var_w / n).sqrt(),
        count: values.len(),
        max_functional: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_share,
        dominated: values.len() > 1 && max_share > 0.5,
    })
}

/// Exponential moment of `which` over a set of trajectories.
pub fn exp_moment_estimate(trajs: &[Trajectory], alpha: f64, which: ExpFunctional) -> Result<ExpMomentEstimate> {
    let values: Vec<f64> = trajs.iter().map(|t| which.evaluate(t, alpha)).collect();
    exp_moment_from_values(&values, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SpectralField, SpectralGrid};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Unforced decay of the shear `a cos(x) e_y`, a steady state of the
    /// convection term, so `u^l = u^0 / (1 + nu k)^l`.
    fn decaying_shear(steps: usize) -> Trajectory {
        let g = SpectralGrid::new(2.0 * PI, 4).unwrap();
        let u0 = SpectralField::solenoidal_mode(g, 1, 0, 2.0, 0.0).unwrap();
        let q = QSpec::from_variances(g, vec![0.0; g.lattice_len()]).unwrap();
        let path = sample_path(&q, steps, 1.0, 0).unwrap();
        run_scheme(&u0, &path, &SchemeParams::new(0.5, 1.0, steps, SchemeKind::Implicit).unwrap()).unwrap()
    }

    #[test]
    fn closed_form_shear_moments() {
        let n = 8;
        let t = decaying_shear(n);
        let (nu, k) = (0.5, 1.0 / n as f64);
        let r = 1.0 / (1.0 + nu * k);
        // |u^l|^2 = |A^{1/2} u^l|^2 = |A u^l|^2 = 8 pi^2 r^{2l}
        let e = |l: usize| 8.0 * PI * PI * r.powi(2 * l as i32);
        let q = 3.0;
        let m = SpectralMoments::of(&t, q).unwrap();
        assert!((m.max_v - e(0).powf(1.5)).abs() < 1e-9 * m.max_v);
        let weighted: f64 = (1..=n).map(|l| 2.0 * nu * k * e(l).powf(1.5)).sum();
        assert!((m.weighted_dissipation - weighted).abs() < 1e-9 * weighted);
        let incs: Vec<f64> = (1..=n).map(|l| e(l) * (1.0 / r - 1.0).powi(2)).collect();
        let ie: f64 = (1..=n).map(|l| incs[l - 1] * e(l)).sum();
        assert!((m.increment_energy - ie).abs() < 1e-9 * ie);
        assert!((m.increments - incs.iter().sum::<f64>().powf(q)).abs() < 1e-9 * m.increments);
        let diss: f64 = (1..=n).map(|l| nu * k * e(l)).sum();
        assert!((m.dissipation - diss.powf(q)).abs() < 1e-9 * m.dissipation);
        assert!(m.pressure < 1e-20);
    }

    #[test]
    fn exp_functionals_on_shear() {
        let t = decaying_shear(4);
        let sup = ExpFunctional::SupV.evaluate(&t, 0.3);
        assert!((sup - 8.0 * PI * PI).abs() < 1e-9);
        // the dissipation term only adds, so the running max is at least the sup
        let with = ExpFunctional::SupVDissipation.evaluate(&t, 0.3);
        assert!(with >= sup);
        assert_eq!(ExpFunctional::SupVDissipation.evaluate(&t, 0.0), sup);
    }

    #[test]
    fn zero_parameter_gives_one() {
        let e = exp_moment_from_values(&[1.0, 5.0, 1e6], 0.0).unwrap();
        assert_eq!(e.mean, 1.0);
        assert_eq!(e.ci_half, 0.0);
        assert!(exp_moment_from_values(&[1.0], -1.0).is_err());
    }

    #[test]
    fn large_exponents_stay_finite_in_log() {
        let e = exp_moment_from_values(&[1000.0, 1000.0], 1.0).unwrap();
        assert!((e.log_mean - 1000.0).abs() < 1e-12);
        assert!(!e.dominated);
        let d = exp_moment_from_values(&[0.0, 0.0, 50.0], 1.0).unwrap();
        assert!(d.dominated && d.max_share > 0.99);
    }

    #[test]
    fn spread_of_report() {
        let est = |m| McEstimate::from_values(&[m, m]);
        let row = |steps, m| MomentRow {
            functional: "max-v".into(),
            exponent: 2.0,
            steps,
            mesh: None,
            estimate: est(m),
            replicates: 2,
            invalid: 0,
        };
        let r = MomentReport {
            rows: vec![row(16, 2.0), row(64, 3.0)],
        };
        assert_eq!(r.spread("max-v"), 1.5);
        assert_eq!(r.spread("other"), f64::INFINITY);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("functional,exponent,N,n,mean,ci_half,replicates,invalid\nmax-v,2,16,,"));
        assert!(s.contains("# spread max-v: 1.500000"));
    }

    proptest! {
        #[test]
        fn log_sum_exp_matches_naive_mean(values in prop::collection::vec(0.0f64..20.0, 2..40), alpha in 0.0f64..2.0) {
            let naive = values.iter().map(|v| (alpha * v).exp()).sum::<f64>() / values.len() as f64;
            let e = exp_moment_from_values(&values, alpha).unwrap();
            prop_assert!((e.mean - naive).abs() <= 1e-12 * naive);
            prop_assert!(e.max_share > 0.0 && e.max_share <= 1.0);
        }
    }
}
