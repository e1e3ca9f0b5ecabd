//! Experiment runner behind the `snse` binary.

pub mod artifacts;
pub mod config;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use log::info;
use snse_core::harness::ou::validate_ou;
use snse_core::harness::{
    check_conditions, estimate_constants, exp_moment_from_values, replicate_seed, run_replicates, write_regularity_csv,
    ConditionInputs, ExpFunctional, MomentSweep, RateReport, RegularityMode, RegularitySweep, SpaceSweep, TimeSweep,
};
use snse_core::scheme::ou_exact_trajectory;
use snse_core::{run_scheme, sample_path, Error, SchemeKind, SchemeParams};
use thiserror::Error;

use artifacts::{manifest_hash, Artifacts};
use config::{ConfigErrors, ExperimentConfig, SweepVariable};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigErrors),

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] Error),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 configuration, 3 solver failure, 4 aborted level, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Usage(_) => 2,
            Self::Core(e) => match e {
                Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::TimeGridMismatch(_) => 2,
                Error::NonConvergence { .. } | Error::LinearSolver(_) => 3,
                Error::LevelAborted { .. } => 4,
                _ => 1,
            },
            Self::Io(_) | Self::Json(_) => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    ConvergeTime,
    ConvergeSpace,
    ConvergeDivfree,
    OuValidate,
    Moments,
    ExpMoments,
    Regularity,
    CheckConditions,
    EstimateConstants,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Self::Simulate,
        Self::ConvergeTime,
        Self::ConvergeSpace,
        Self::ConvergeDivfree,
        Self::OuValidate,
        Self::Moments,
        Self::ExpMoments,
        Self::Regularity,
        Self::CheckConditions,
        Self::EstimateConstants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::ConvergeTime => "converge-time",
            Self::ConvergeSpace => "converge-space",
            Self::ConvergeDivfree => "converge-divfree",
            Self::OuValidate => "ou-validate",
            Self::Moments => "moments",
            Self::ExpMoments => "exp-moments",
            Self::Regularity => "regularity",
            Self::CheckConditions => "check-conditions",
            Self::EstimateConstants => "estimate-constants",
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Usage(format!("unknown command `{s}`")))
    }
}

/// What a finished command leaves behind.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: PathBuf,
    pub hash: String,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

fn require_variable(cfg: &ExperimentConfig, want: SweepVariable, cmd: Command) -> Result<(), CliError> {
    if cfg.sweep.variable == want {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "`{}` sweeps `{}`; set [sweep] variable = \"{}\"",
            cmd.name(),
            want.name(),
            want.name()
        )))
    }
}

fn time_sweep(cfg: &ExperimentConfig, scheme: SchemeKind, reference: SchemeKind, convection: bool) -> Result<TimeSweep, CliError> {
    Ok(TimeSweep {
        viscosity: cfg.physical.viscosity,
        horizon: cfg.physical.horizon,
        noise: cfg.qspec()?,
        initial: cfg.initial.condition.clone(),
        levels: cfg.sweep.levels.clone(),
        reference_steps: cfg.sweep.reference_steps,
        replicates: cfg.sweep.replicates,
        master_seed: cfg.noise.seed,
        scheme,
        reference,
        convection,
        tolerance: cfg.scheme.tolerance,
        max_iter: cfg.scheme.max_iter,
    })
}

fn csv_of(report: &RateReport) -> Result<String, CliError> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn slope_line(name: &str, report: &RateReport) -> String {
    match (report.fit, report.fit_v) {
        (Some(f), Some(v)) => format!(
            "{name}: slope {:.4} (se {:.4}), dissipation-term slope {:.4}",
            f.slope, f.slope_std_error, v.slope
        ),
        (Some(f), None) => format!("{name}: slope {:.4} (se {:.4})", f.slope, f.slope_std_error),
        _ => format!("{name}: too few usable levels for a slope"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("nan".into(), |x| format!("{x:.10e}"))
}

/// Runs `command` with a validated configuration, writing artifacts into
/// `cfg.output.dir`. Returns an error with an exit code on failure; an
/// aborted sweep level surfaces as [`Error::LevelAborted`] after the
/// artifacts are written.
pub fn run_command(command: Command, cfg: &ExperimentConfig, threads: usize) -> Result<Outcome, CliError> {
    cfg.validate()?;
    let hash = manifest_hash(command.name(), cfg);
    let mut out = Artifacts::create(&cfg.output.dir, cfg.output.format, hash.clone())?;
    let mut summary = Vec::new();
    let mut aborted: Option<Error> = None;
    let seeds: Vec<u64> = (0..cfg.sweep.replicates as u64)
        .map(|i| replicate_seed(cfg.noise.seed, i))
        .collect();
    info!("{} (manifest {})", command.name(), &hash[..12]);
    match command {
        Command::Simulate => {
            let q = cfg.qspec()?;
            let grid = *q.grid();
            let u0 = cfg.initial.condition.sample(grid, cfg.noise.seed)?;
            let path = sample_path(&q, cfg.sweep.steps, cfg.physical.horizon, cfg.noise.seed)?;
            let p = SchemeParams::new(cfg.physical.viscosity, cfg.physical.horizon, cfg.sweep.steps, cfg.scheme.kind)?
                .with_tolerance(cfg.scheme.tolerance, cfg.scheme.max_iter)?;
            let p = if cfg.scheme.convection { p } else { p.without_convection() };
            let traj = if cfg.scheme.kind == SchemeKind::OuExact {
                ou_exact_trajectory(&u0, &path, &p)?
            } else {
                run_scheme(&u0, &path, &p)?
            };
            let mut bin = Vec::new();
            traj.write_to(&mut bin)?;
            out.binary("trajectory.nst", &bin)?;
            let mut csv = String::from("step,time,energy,v_norm_sq,iterations,energy_residual\n");
            let k = traj.step_size();
            for (l, u) in traj.states().iter().enumerate() {
                let (it, res) = match l {
                    0 => (0, 0.0),
                    _ => (traj.stats()[l - 1].iterations, traj.stats()[l - 1].energy_residual),
                };
                writeln!(
                    csv,
                    "{l},{:.10e},{:.10e},{:.10e},{it},{res:.3e}",
                    l as f64 * k,
                    u.l2_norm_sq(),
                    u.v_norm_sq()
                )
                .expect("string write");
            }
            out.table("trajectory", &csv)?;
            summary.push(format!(
                "{} steps, final energy {:.6e}",
                traj.steps(),
                traj.last().l2_norm_sq()
            ));
        }
        Command::ConvergeTime | Command::ConvergeDivfree => {
            require_variable(cfg, SweepVariable::Steps, command)?;
            let (scheme, reference, convection) = match command {
                Command::ConvergeDivfree => (SchemeKind::SemiImplicit, SchemeKind::Implicit, true),
                _ if cfg.scheme.kind == SchemeKind::OuExact => {
                    return Err(CliError::Usage(
                        "the exact linear solution is the reference, not a sweep level; use kind = \"implicit\"".into(),
                    ))
                }
                _ if !cfg.scheme.convection => (cfg.scheme.kind, SchemeKind::OuExact, false),
                _ => (cfg.scheme.kind, SchemeKind::Implicit, true),
            };
            let outcome = time_sweep(cfg, scheme, reference, convection)?.run()?;
            out.table("rates", &csv_of(&outcome.report)?)?;
            summary.push(slope_line(&format!("{} vs {}", scheme.name(), reference.name()), &outcome.report));
            if outcome.reference_failures > 0 {
                summary.push(format!("{} replicates lost to reference failures", outcome.reference_failures));
            }
            aborted = outcome.report.check_aborted().err();
        }
        Command::ConvergeSpace => {
            require_variable(cfg, SweepVariable::Mesh, command)?;
            let sweep = SpaceSweep {
                viscosity: cfg.physical.viscosity,
                horizon: cfg.physical.horizon,
                noise: cfg.qspec()?,
                initial: cfg.initial.condition.clone(),
                levels: cfg.sweep.levels.clone(),
                steps: cfg.sweep.steps,
                replicates: cfg.sweep.replicates,
                master_seed: cfg.noise.seed,
                convection: cfg.scheme.convection,
                tolerance: cfg.scheme.tolerance,
                max_iter: cfg.scheme.max_iter,
            };
            let outcome = sweep.run()?;
            out.table("rates", &csv_of(&outcome.report)?)?;
            summary.push(slope_line("finite elements vs spectral", &outcome.report));
            aborted = outcome.report.check_aborted().err();
        }
        Command::OuValidate => {
            require_variable(cfg, SweepVariable::Steps, command)?;
            let sweep = time_sweep(cfg, SchemeKind::Implicit, SchemeKind::OuExact, false)?;
            let v = validate_ou(&sweep, cfg.sweep.oracle_replicates, 8)?;
            out.table("rates", &csv_of(&v.sweep.report)?)?;
            let mut csv = String::from("level,scheme_mean,scheme_ci_half,oracle_mean,oracle_ci_half\n");
            for (row, (o, _)) in v.sweep.report.rows.iter().zip(&v.oracle) {
                writeln!(
                    csv,
                    "{},{},{},{:.10e},{:.10e}",
                    row.level,
                    fmt_opt(row.l2.map(|e| e.mean)),
                    fmt_opt(row.l2.map(|e| e.ci_half)),
                    o.mean,
                    o.ci_half
                )
                .expect("string write");
            }
            writeln!(
                csv,
                "# slopes: scheme={} oracle={} gap={}",
                fmt_opt(v.scheme_slope()),
                fmt_opt(v.oracle_slope()),
                fmt_opt(v.slope_gap())
            )
            .expect("string write");
            writeln!(
                csv,
                "# variance check: {} comparisons, worst z={:.3}, failures above 5 SE={}",
                v.variance.checks, v.variance.worst_z, v.variance.failures
            )
            .expect("string write");
            out.table("ou", &csv)?;
            summary.push(format!(
                "scheme slope {}, oracle slope {}, variance worst z {:.2}",
                fmt_opt(v.scheme_slope()),
                fmt_opt(v.oracle_slope()),
                v.variance.worst_z
            ));
            aborted = v.sweep.report.check_aborted().err();
        }
        Command::Moments => {
            let sweep = MomentSweep {
                viscosity: cfg.physical.viscosity,
                horizon: cfg.physical.horizon,
                noise: cfg.qspec()?,
                initial: cfg.initial.condition.clone(),
                steps: cfg.sweep.levels.clone(),
                exponent: cfg.sweep.exponent,
                replicates: cfg.sweep.replicates,
                master_seed: cfg.noise.seed,
                scheme: cfg.scheme.kind,
                tolerance: cfg.scheme.tolerance,
                max_iter: cfg.scheme.max_iter,
                fem_meshes: cfg.sweep.fem_meshes.clone(),
                fem_steps: cfg.sweep.fem_steps.clone(),
            };
            let report = sweep.run()?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            out.table("moments", &String::from_utf8(buf).expect("utf-8"))?;
            for f in report.functionals() {
                summary.push(format!("{f}: spread {:.3}", report.spread(f)));
            }
            if let Some(r) = report.rows.iter().find(|r| 10 * r.invalid > r.replicates) {
                aborted = Some(Error::LevelAborted {
                    level: r.steps,
                    invalid: r.invalid,
                    total: r.replicates,
                });
            }
        }
        Command::ExpMoments => {
            let q = cfg.qspec()?;
            let grid = *q.grid();
            let mut csv = String::from(
                "functional,alpha,N,mean,ci_half,log_mean,max_functional,max_share,dominated,replicates\n",
            );
            let functionals = [ExpFunctional::SupV, ExpFunctional::SupVDissipation];
            for &n in &cfg.sweep.levels {
                let p = SchemeParams::new(cfg.physical.viscosity, cfg.physical.horizon, n, cfg.scheme.kind)?
                    .with_tolerance(cfg.scheme.tolerance, cfg.scheme.max_iter)?;
                let p = if cfg.scheme.convection { p } else { p.without_convection() };
                // values[replicate][functional][alpha]
                let values: Vec<Vec<Vec<f64>>> = run_replicates(cfg.sweep.replicates, |i| {
                    let seed = seeds[i];
                    let path = sample_path(&q, n, cfg.physical.horizon, seed)?;
                    let u0 = cfg.initial.condition.sample(grid, seed)?;
                    let t = if cfg.scheme.kind == SchemeKind::OuExact {
                        ou_exact_trajectory(&u0, &path, &p)?
                    } else {
                        run_scheme(&u0, &path, &p)?
                    };
                    Ok(functionals
                        .iter()
                        .map(|f| cfg.sweep.alphas.iter().map(|&a| f.evaluate(&t, a)).collect())
                        .collect())
                })
                .into_iter()
                .collect::<Result<_, Error>>()?;
                for (fi, f) in functionals.iter().enumerate() {
                    for (ai, &alpha) in cfg.sweep.alphas.iter().enumerate() {
                        let v: Vec<f64> = values.iter().map(|r| r[fi][ai]).collect();
                        let e = exp_moment_from_values(&v, alpha)?;
                        writeln!(
                            csv,
                            "{},{alpha},{n},{:.10e},{:.10e},{:.10e},{:.10e},{:.6},{},{}",
                            f.name(),
                            e.mean,
                            e.ci_half,
                            e.log_mean,
                            e.max_functional,
                            e.max_share,
                            e.dominated,
                            e.count
                        )
                        .expect("string write");
                        if e.dominated {
                            summary.push(format!("{} at alpha {alpha}, N = {n}: dominated by one sample", f.name()));
                        }
                    }
                }
            }
            out.table("exp_moments", &csv)?;
            summary.push(format!(
                "{} levels x {} parameters estimated",
                cfg.sweep.levels.len(),
                cfg.sweep.alphas.len()
            ));
        }
        Command::Regularity => {
            let sweep = RegularitySweep {
                viscosity: cfg.physical.viscosity,
                horizon: cfg.physical.horizon,
                noise: cfg.qspec()?,
                initial: cfg.initial.condition.clone(),
                steps: cfg.sweep.reference_steps,
                replicates: cfg.sweep.replicates,
                master_seed: cfg.noise.seed,
                scheme: cfg.scheme.kind,
                convection: cfg.scheme.convection,
                tolerance: cfg.scheme.tolerance,
                max_iter: cfg.scheme.max_iter,
            };
            let (l2, v) = sweep.run()?;
            let mut buf = Vec::new();
            write_regularity_csv(&mut buf, &[(RegularityMode::L2, &l2), (RegularityMode::V, &v)])?;
            out.table("regularity", &String::from_utf8(buf).expect("utf-8"))?;
            summary.push(format!(
                "L2 exponent {}, V exponent {}",
                fmt_opt(l2.slope()),
                fmt_opt(v.slope())
            ));
        }
        Command::CheckConditions => {
            let q = cfg.qspec()?;
            let grid = *q.grid();
            let (c_bar, sigma) = match (cfg.constants.c_bar, cfg.constants.sigma) {
                (Some(c), Some(s)) => (c, s),
                (c, s) => {
                    let est = estimate_constants(grid, cfg.constants.samples, cfg.constants.refinements, cfg.noise.seed)?;
                    (c.unwrap_or(est.c_bar), s.unwrap_or(est.sigma))
                }
            };
            let gamma0 = match cfg.initial.gamma0 {
                Some(g) => Some(g),
                None => cfg.initial.condition.gamma0_bound(&grid)?,
            };
            let report = check_conditions(ConditionInputs {
                viscosity: cfg.physical.viscosity,
                horizon: cfg.physical.horizon,
                trace_q: q.trace(),
                c_bar,
                sigma,
                gamma0,
                mu: cfg.constants.mu,
            })?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            let mut csv = String::from_utf8(buf).expect("utf-8");
            writeln!(
                csv,
                "# inputs: trace_q={:.6e} k0={:.6e} c_bar={c_bar:.6} sigma={sigma:.6} alpha0={:.6e} beta0={:.6e} beta1={:.6e}",
                q.trace(),
                q.k0(),
                report.alpha0,
                report.beta0,
                report.beta1
            )
            .expect("string write");
            out.table("conditions", &csv)?;
            let failing: Vec<&str> = report.rows.iter().filter(|r| !r.pass).map(|r| r.theorem).collect();
            summary.push(if failing.is_empty() {
                "all conditions hold".to_string()
            } else {
                format!("failing: {}", failing.join(", "))
            });
        }
        Command::EstimateConstants => {
            let grid = cfg.grid()?;
            let est = estimate_constants(grid, cfg.constants.samples, cfg.constants.refinements, cfg.noise.seed)?;
            let mut csv = String::from("iteration,c_bar,sigma\n");
            for (i, (c, s)) in est.c_bar_history.iter().zip(&est.sigma_history).enumerate() {
                writeln!(csv, "{},{c:.12e},{s:.12e}", i + 1).expect("string write");
            }
            writeln!(
                csv,
                "# lower bounds: c_bar={:.10} sigma={:.10} samples={} refinements={}",
                est.c_bar, est.sigma, est.samples, est.refinements
            )
            .expect("string write");
            out.table("constants", &csv)?;
            summary.push(format!("c_bar >= {:.6}, sigma >= {:.6}", est.c_bar, est.sigma));
        }
    }
    let manifest = out.finish(command.name(), cfg, &seeds, threads)?;
    match aborted {
        Some(e) => Err(e.into()),
        None => Ok(Outcome { manifest, hash, summary }),
    }
}
