//! Acceptance gate. Each test prints one `PASS`/`FAIL` line to stderr
//! (uncaptured) and then asserts its criterion.

use std::f64::consts::PI;
use std::io::Write;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snse_core::fem::*;
use snse_core::harness::conditions::{divfree_rate_threshold, fem_rate_threshold, time_rate_threshold};
use snse_core::harness::ou::{channel_values, ou_channels};
use snse_core::harness::*;
use snse_core::spectral::trilinear_form;
use snse_core::*;

const LENGTH: f64 = 2.0 * PI;

fn report(id: usize, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {id:>2} [{name}] {verdict} ({:.1} s): {detail}\n", elapsed.as_secs_f64());
    // bypasses the test harness capture so the gate summary is always visible
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn grid(m: usize) -> SpectralGrid {
    SpectralGrid::new(LENGTH, m).unwrap()
}

/// Lower bounds of the interpolation constants on the M = 16 lattice.
fn constants() -> ConstantsEstimate {
    estimate_constants(grid(16), 1000, 400, 17).unwrap()
}

fn time_sweep(noise: QSpec, scheme: SchemeKind, replicates: usize) -> TimeSweep {
    TimeSweep {
        viscosity: 1.0,
        horizon: 1.0,
        noise,
        initial: InitialCondition::Zero,
        levels: vec![8, 16, 32, 64],
        reference_steps: 512,
        replicates,
        master_seed: 2024,
        scheme,
        reference: SchemeKind::Implicit,
        convection: true,
        tolerance: 1e-12,
        max_iter: 200,
    }
}

fn in_band(x: Option<f64>, lo: f64, hi: f64) -> bool {
    x.is_some_and(|s| (lo..=hi).contains(&s))
}

fn fmt(x: Option<f64>) -> String {
    x.map_or("n/a".into(), |v| format!("{v:.3}"))
}

#[test]
fn c01_bilinear_identities() {
    let start = Instant::now();
    let g = grid(16);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_skew, mut worst_au) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let du = rng.random_range(0.5..4.0);
        let dv = rng.random_range(0.5..4.0);
        let u = SpectralField::random_solenoidal(g, &mut rng, du);
        let v = SpectralField::random_solenoidal(g, &mut rng, dv);
        let (nu, nv) = (u.sobolev_norm(1.0), v.sobolev_norm(1.0));
        worst_skew = worst_skew.max(trilinear_form(&u, &v, &v).unwrap().abs() / (nu * nv * nv));
        let au = u.apply_stokes_power(1.0);
        worst_au = worst_au.max(trilinear_form(&u, &u, &au).unwrap().abs() / (nu * nu * au.l2_norm()));
    }
    let elapsed = start.elapsed();
    let pass = worst_skew <= 1e-10 && worst_au <= 1e-10 && elapsed < Duration::from_secs(10);
    report(
        1,
        "bilinear identities",
        pass,
        elapsed,
        &format!("max |b(u,v,v)|/(|u||v|^2) = {worst_skew:.2e}, max |b(u,u,Au)|/(|u|^2|Au|) = {worst_au:.2e}"),
    );
    assert!(pass);
}

#[test]
fn c02_energy_identity() {
    let start = Instant::now();
    let tol = 1e-12;
    let steps = 1024;
    let q = QSpec::power_law(grid(16), 1.0, 2.1, DecayCheck::Warn).unwrap().with_trace(25.0);
    let path = sample_path(&q, steps, 1.0, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let u0 = SpectralField::random_solenoidal(grid(16), &mut rng, 2.0).scaled(3.0);
    let mut worst = [0.0f64; 3];
    for (i, kind) in [SchemeKind::Implicit, SchemeKind::SemiImplicit].into_iter().enumerate() {
        let p = SchemeParams::new(1.0, 1.0, steps, kind).unwrap().with_tolerance(tol, 200).unwrap();
        let t = run_scheme(&u0, &path, &p).unwrap();
        worst[i] = t.energy_residuals().iter().fold(0.0, |m, r| m.max(r.abs()));
    }
    let qf = QSpec::power_law(grid(8), 1.0, 2.1, DecayCheck::Warn).unwrap().with_trace(25.0);
    let pf = sample_path(&qf, steps, 1.0, 6).unwrap();
    let sys = FemSystem::new(PeriodicMesh::new(LENGTH, 8).unwrap());
    let init = fem_initial_value(&sys, &u0.resample(grid(8)).unwrap()).unwrap();
    let fem = run_fem_scheme(&sys, &init, &pf, steps, 1.0, true).unwrap();
    worst[2] = fem.stats.iter().fold(0.0, |m, s| m.max(s.energy_residual.abs()));
    let elapsed = start.elapsed();
    let pass = worst.iter().all(|&w| w <= 10.0 * tol) && elapsed < Duration::from_secs(60);
    report(
        2,
        "energy identity",
        pass,
        elapsed,
        &format!(
            "worst residual over {steps} steps: implicit {:.2e}, semi-implicit {:.2e}, finite elements {:.2e} (bound {:.0e})",
            worst[0],
            worst[1],
            worst[2],
            10.0 * tol
        ),
    );
    assert!(pass);
}

#[test]
fn c03_noise_coupling() {
    let start = Instant::now();
    // dyadic coarsening telescopes bitwise
    let q = QSpec::power_law(grid(8), 1.0, 2.5, DecayCheck::Reject).unwrap();
    let path = sample_path(&q, 256, 1.0, 9).unwrap();
    let mut telescopes = true;
    for &(k1, k2) in path.half_modes() {
        for ch in 0..2 {
            let mut n = 256;
            while n > 1 {
                let fine = path.coarse_channel(k1, k2, ch, n).unwrap();
                let coarse = path.coarse_channel(k1, k2, ch, n / 2).unwrap();
                telescopes &= coarse.iter().enumerate().all(|(j, c)| *c == fine[2 * j] + fine[2 * j + 1]);
                n /= 2;
            }
        }
    }
    // per-mode variance and E |dW|^2 over 10^4 one-step draws
    let q4 = QSpec::power_law(grid(4), 1.0, 2.5, DecayCheck::Reject).unwrap();
    let (draws, horizon) = (10_000usize, 0.5);
    let zero = SpectralField::zeros(grid(4));
    let channels = ou_channels(&zero, &q4, 1.0);
    let mut sq = vec![0.0; channels.len()];
    let mut norms = Vec::with_capacity(draws);
    for seed in 0..draws as u64 {
        let dw = sample_path(&q4, 1, horizon, seed).unwrap().increment_field(1, 1).unwrap();
        for (i, c) in channels.iter().enumerate() {
            sq[i] += channel_values(&dw, c.k.0, c.k.1)[c.channel].powi(2);
        }
        norms.push(dw.l2_norm_sq());
    }
    let n = draws as f64;
    let worst_mode_z = channels
        .iter()
        .zip(&sq)
        .map(|(c, s)| {
            let want = c.q * horizon;
            (s / n - want).abs() / (want * (2.0 / n).sqrt())
        })
        .fold(0.0, f64::max);
    let mean = norms.iter().sum::<f64>() / n;
    let sd = (norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let trace_z = (mean - horizon * q4.trace()).abs() / (sd / n.sqrt());
    let elapsed = start.elapsed();
    let pass = telescopes && worst_mode_z < 5.0 && trace_z < 5.0 && elapsed < Duration::from_secs(30);
    report(
        3,
        "noise coupling",
        pass,
        elapsed,
        &format!(
            "bitwise telescoping {telescopes}, worst per-mode variance z {worst_mode_z:.2} over {} channels, E|dW|^2 z {trace_z:.2}",
            channels.len()
        ),
    );
    assert!(pass);
}

#[test]
fn c04_linear_oracle_suite() {
    let start = Instant::now();
    let sweep = TimeSweep {
        viscosity: 1.0,
        horizon: 1.0,
        noise: QSpec::power_law(grid(8), 1.0, 2.5, DecayCheck::Reject).unwrap(),
        initial: InitialCondition::Shear {
            amplitude: 0.5,
            wavenumber: 1,
        },
        levels: vec![4, 8, 16, 32],
        reference_steps: 256,
        replicates: 256,
        master_seed: 4,
        scheme: SchemeKind::Implicit,
        reference: SchemeKind::OuExact,
        convection: false,
        tolerance: 1e-12,
        max_iter: 100,
    };
    let v = validate_ou(&sweep, 1024, 8).unwrap();
    let elapsed = start.elapsed();
    let gap = v.slope_gap();
    let pass = v.variance.failures == 0 && gap.is_some_and(|g| g <= 0.15) && elapsed < Duration::from_secs(120);
    report(
        4,
        "linear oracle suite",
        pass,
        elapsed,
        &format!(
            "variance worst z {:.2} over {} checks; slope vs exact {} and scalar oracle {} (gap {})",
            v.variance.worst_z,
            v.variance.checks,
            fmt(v.scheme_slope()),
            fmt(v.oracle_slope()),
            fmt(gap)
        ),
    );
    assert!(pass);
}

#[test]
fn c05_time_rate() {
    let start = Instant::now();
    let c = constants();
    let trace = 0.5 * time_rate_threshold(1.0, 1.0, c.c_bar);
    let q = QSpec::power_law(grid(16), 1.0, 2.1, DecayCheck::Warn).unwrap().with_trace(trace);
    let out = time_sweep(q, SchemeKind::Implicit, 128).run().unwrap();
    let elapsed = start.elapsed();
    let slope = out.report.slope();
    let pass = in_band(slope, 0.75, 1.15) && out.report.check_aborted().is_ok() && elapsed <= Duration::from_secs(1200);
    report(
        5,
        "time-rate",
        pass,
        elapsed,
        &format!(
            "C_bar {:.4}, Tr Q {trace:.3}: slope {} (band [0.75, 1.15]), dissipation-term slope {}",
            c.c_bar,
            fmt(slope),
            fmt(out.report.fit_v.map(|f| f.slope))
        ),
    );
    assert!(pass);
}

#[test]
fn c06_space_rate() {
    let start = Instant::now();
    let c = constants();
    let trace = 0.5 * fem_rate_threshold(1.0, 1.0, c.c_bar, c.sigma);
    let sweep = SpaceSweep {
        viscosity: 1.0,
        horizon: 1.0,
        noise: QSpec::power_law(grid(16), 1.0, 2.1, DecayCheck::Warn).unwrap().with_trace(trace),
        initial: InitialCondition::Zero,
        levels: vec![4, 8, 16, 32],
        steps: 256,
        replicates: 32,
        master_seed: 2025,
        convection: true,
        tolerance: 1e-12,
        max_iter: 200,
    };
    let out = sweep.run().unwrap();
    let elapsed = start.elapsed();
    let slope = out.report.slope();
    let pass = in_band(slope, 1.7, 2.3) && out.report.check_aborted().is_ok() && elapsed <= Duration::from_secs(1800);
    report(
        6,
        "fem-rate",
        pass,
        elapsed,
        &format!(
            "Tr Q {trace:.3}: slope in h {} (band [1.7, 2.3]), gradient-term slope {}",
            fmt(slope),
            fmt(out.report.fit_v.map(|f| f.slope))
        ),
    );
    assert!(pass);
}

#[test]
fn c07_divfree_rate() {
    let start = Instant::now();
    let c = constants();
    let trace = 0.5 * divfree_rate_threshold(1.0, 1.0, c.c_bar);
    let q = QSpec::power_law(grid(16), 1.0, 2.1, DecayCheck::Warn).unwrap().with_trace(trace);
    let out = time_sweep(q, SchemeKind::SemiImplicit, 128).run().unwrap();
    let elapsed = start.elapsed();
    let slope = out.report.slope();
    let pass = in_band(slope, 0.75, 1.15) && out.report.check_aborted().is_ok() && elapsed <= Duration::from_secs(900);
    report(
        7,
        "divfree-rate",
        pass,
        elapsed,
        &format!(
            "Tr Q {trace:.3}: semi-implicit vs implicit slope {} (band [0.75, 1.15]), dissipation-term slope {}",
            fmt(slope),
            fmt(out.report.fit_v.map(|f| f.slope))
        ),
    );
    assert!(pass);
}

#[test]
fn c08_moment_stability() {
    let start = Instant::now();
    let c = constants();
    let trace = 0.5 * time_rate_threshold(1.0, 1.0, c.c_bar);
    let sweep = MomentSweep {
        viscosity: 1.0,
        horizon: 1.0,
        noise: QSpec::power_law(grid(16), 1.0, 3.0, DecayCheck::Reject).unwrap().with_trace(trace),
        initial: InitialCondition::Zero,
        steps: vec![16, 64, 256],
        exponent: 2.0,
        replicates: 64,
        master_seed: 8,
        scheme: SchemeKind::Implicit,
        tolerance: 1e-12,
        max_iter: 200,
        fem_meshes: vec![4, 8],
        fem_steps: vec![16, 64],
    };
    let rep = sweep.run().unwrap();
    let elapsed = start.elapsed();
    // the finite-element multiplier also carries the gradient part of the
    // projected noise, so its moment is a diagnostic, not a listed functional
    let listed: Vec<&str> = rep.functionals().into_iter().filter(|f| *f != "fem-pressure").collect();
    let spreads: Vec<(String, f64)> = listed.iter().map(|f| (f.to_string(), rep.spread(f))).collect();
    let pass = spreads.iter().all(|(_, s)| *s < 2.0) && elapsed <= Duration::from_secs(900);
    let detail = spreads
        .iter()
        .map(|(f, s)| format!("{f} {s:.2}"))
        .collect::<Vec<_>>()
        .join(", ");
    report(8, "moment stability", pass, elapsed, &format!("max/min ratios: {detail}"));
    assert!(pass);
}

struct StreamField {
    a: f64,
}

impl StreamField {
    // stream function sin(a x) cos(2 a y)
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        let a = self.a;
        [-2.0 * a * (a * p[0]).sin() * (2.0 * a * p[1]).sin(), -a * (a * p[0]).cos() * (2.0 * a * p[1]).cos()]
    }

    fn gradient(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        let (a, x, y) = (self.a, p[0], p[1]);
        let a2 = a * a;
        [
            [-2.0 * a2 * (a * x).cos() * (2.0 * a * y).sin(), -4.0 * a2 * (a * x).sin() * (2.0 * a * y).cos()],
            [a2 * (a * x).sin() * (2.0 * a * y).cos(), 2.0 * a2 * (a * x).cos() * (2.0 * a * y).sin()],
        ]
    }
}

fn orders(squared_errors: &[f64]) -> Vec<f64> {
    squared_errors.windows(2).map(|w| 0.5 * (w[0] / w[1]).log2()).collect()
}

#[test]
fn c09_fem_structure() {
    let start = Instant::now();
    let meshes = [4usize, 8, 16, 32];
    let betas: Vec<f64> = meshes
        .iter()
        .map(|&n| infsup_analysis(&FemSystem::new(PeriodicMesh::new(1.0, n).unwrap())).unwrap().beta)
        .collect();
    let ratio = betas.iter().copied().fold(f64::INFINITY, f64::min) / betas.iter().copied().fold(0.0, f64::max);

    let f = StreamField { a: 2.0 * PI };
    let pressure = |p: [f64; 2]| (2.0 * PI * p[0]).cos() * (2.0 * PI * p[1]).sin() + 0.3 * (4.0 * PI * p[1]).cos();
    let rule = Quadrature::collapsed(8);
    let (mut l2, mut h1, mut pr) = (Vec::new(), Vec::new(), Vec::new());
    for n in [8usize, 16, 32] {
        let sys = FemSystem::new(PeriodicMesh::new(1.0, n).unwrap());
        let u = sys.project_load(&sys.load_fn(|p| f.value(p), &rule)).unwrap();
        let (e0, e1) = sys.velocity_errors(&u, |p| f.value(p), |p| f.gradient(p), &rule);
        l2.push(e0);
        h1.push(e1);
        let p = sys.project_pressure_fn(pressure, &rule).unwrap();
        pr.push(sys.pressure_error(&p, pressure, &rule));
    }
    let min = |v: Vec<f64>| v.into_iter().fold(f64::INFINITY, f64::min);
    let (o0, o1, op) = (min(orders(&l2)), min(orders(&h1)), min(orders(&pr)));
    let elapsed = start.elapsed();
    let pass = betas.iter().all(|&b| b > 0.0)
        && ratio >= 0.8
        && o0 >= 1.9
        && o1 >= 0.9
        && op >= 0.9
        && elapsed <= Duration::from_secs(300);
    report(
        9,
        "fem structure",
        pass,
        elapsed,
        &format!(
            "inf-sup {betas:.4?} (min/max {ratio:.3}); projection orders L2 {o0:.2}, H1 {o1:.2}, pressure {op:.2}"
        ),
    );
    assert!(pass);
}

#[test]
fn c10_time_regularity() {
    let start = Instant::now();
    let sweep = RegularitySweep {
        viscosity: 1.0,
        horizon: 1.0,
        noise: QSpec::power_law(grid(16), 1.0, 3.0, DecayCheck::Reject).unwrap().with_trace(1.0),
        initial: InitialCondition::Zero,
        steps: 256,
        replicates: 64,
        master_seed: 10,
        scheme: SchemeKind::Implicit,
        convection: true,
        tolerance: 1e-12,
        max_iter: 200,
    };
    let (l2, v) = sweep.run().unwrap();
    let elapsed = start.elapsed();
    let (s2, sv) = (l2.slope(), v.slope());
    let pass = s2.is_some_and(|s| s >= 0.8) && sv.is_some_and(|s| s >= 0.7) && elapsed <= Duration::from_secs(600);
    report(
        10,
        "time regularity",
        pass,
        elapsed,
        &format!("L2 increment exponent {} (>= 0.8), V functional exponent {} (>= 0.7)", fmt(s2), fmt(sv)),
    );
    assert!(pass);
}

#[test]
fn c11_condition_checker() {
    let start = Instant::now();
    // nu = T = 1, C_bar = 2, sigma = 1
    let exact = time_rate_threshold(1.0, 1.0, 2.0) == 0.5
        && fem_rate_threshold(1.0, 1.0, 2.0, 1.0) == 1.0 / 26.0
        && divfree_rate_threshold(1.0, 1.0, 2.0) == 0.2;
    let report_rows = check_conditions(ConditionInputs {
        viscosity: 1.0,
        horizon: 1.0,
        trace_q: 0.01,
        c_bar: 2.0,
        sigma: 1.0,
        gamma0: None,
        mu: 0.5,
    })
    .unwrap();
    let rows_match = report_rows.row("time-rate").unwrap().threshold == 0.5
        && report_rows.row("fem-rate").unwrap().threshold == 1.0 / 26.0
        && report_rows.row("divfree-rate").unwrap().threshold == 0.2;

    let mut runner = TestRunner::new(Config {
        cases: 256,
        ..Config::default()
    });
    let monotone = runner
        .run(
            &(0.1f64..10.0, 0.1f64..10.0, 0.05f64..5.0, 0.05f64..5.0, 1.01f64..3.0),
            |(nu, t, c, s, f)| {
                let thresholds: [fn(f64, f64, f64, f64) -> f64; 3] = [
                    |nu, t, c, _| time_rate_threshold(nu, t, c),
                    fem_rate_threshold,
                    |nu, t, c, _| divfree_rate_threshold(nu, t, c),
                ];
                for th in thresholds {
                    let base: f64 = th(nu, t, c, s);
                    prop_assert!(base > 0.0);
                    prop_assert!(th(nu * f, t, c, s) > base);
                    prop_assert!(th(nu, t * f, c, s) < base);
                    prop_assert!(th(nu, t, c * f, s) < base);
                    prop_assert!(th(nu, t, c, s * f) <= base);
                }
                Ok(())
            },
        )
        .is_ok();
    let elapsed = start.elapsed();
    let pass = exact && rows_match && monotone && elapsed < Duration::from_secs(1);
    report(
        11,
        "condition checker",
        pass,
        elapsed,
        &format!("exact thresholds {exact}, report rows {rows_match}, monotone in nu, T, C_bar, sigma {monotone}"),
    );
    assert!(pass);
}
