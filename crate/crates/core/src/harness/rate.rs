use std::io::Write;

use super::stats::McEstimate;
use crate::error::{Error, Result};

/// Weighted least-squares line through `(log scale, log value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Standard error of the slope from the weighted residuals (zero for two
    /// points or an exact fit).
    pub slope_std_error: f64,
    pub points: usize,
}

/// Fits `log value = intercept + slope * log scale` with weights. Points with
/// non-positive or non-finite scale, value or weight are skipped.
pub fn fit_rate(points: &[(f64, f64, f64)]) -> Result<RateFit> {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter(|(s, v, w)| s.is_finite() && v.is_finite() && w.is_finite() && *s > 0.0 && *v > 0.0 && *w > 0.0)
        .map(|&(s, v, w)| (s.ln(), v.ln(), w))
        .collect();
    if usable.len() < 3 {
        return Err(Error::InsufficientPoints { usable: usable.len() });
    }
    let sw: f64 = usable.iter().map(|p| p.2).sum();
    let mx = usable.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = usable.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = usable.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| p.2 * (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidParameter("all rate-fit scales coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = usable.len() as f64 - 2.0;
    let slope_std_error = (sse / dof / sxx).max(0.0).sqrt();
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        slope_std_error,
        points: usable.len(),
    })
}

/// One level of a convergence sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    /// Sweep parameter value: step count `N` or mesh subdivisions `n`.
    pub level: usize,
    /// Abscissa of the fit: `k = T / N` or `h = L sqrt(2) / n`.
    pub scale: f64,
    /// `E max_l |e_l|^2` over valid replicates.
    pub l2: Option<McEstimate>,
    /// Dissipation part of the error functional.
    pub v: Option<McEstimate>,
    pub replicates: usize,
    pub invalid: usize,
}

impl RateRow {
    pub fn from_samples(level: usize, scale: f64, l2: &[Option<f64>], v: &[Option<f64>]) -> Self {
        let ok_l2: Vec<f64> = l2.iter().flatten().copied().collect();
        let ok_v: Vec<f64> = v.iter().flatten().copied().collect();
        Self {
            level,
            scale,
            l2: McEstimate::from_values(&ok_l2),
            v: McEstimate::from_values(&ok_v),
            replicates: l2.len(),
            invalid: l2.len() - ok_l2.len(),
        }
    }

    /// More than 10% invalid replicates.
    pub fn aborted(&self) -> bool {
        10 * self.invalid > self.replicates
    }

    /// Eligible for the fit: not aborted and half-width below 30% of the mean.
    pub fn fit_eligible(&self, estimate: Option<&McEstimate>) -> bool {
        match estimate {
            Some(e) => !self.aborted() && e.mean > 0.0 && e.ci_half < 0.3 * e.mean,
            None => false,
        }
    }
}

/// Per-level Monte Carlo means with fitted log-log slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    /// `N` (time sweep) or `n` (mesh sweep).
    pub sweep_var: String,
    pub rows: Vec<RateRow>,
    pub fit: Option<RateFit>,
    pub fit_v: Option<RateFit>,
    /// Slope refitted without the coarsest eligible level.
    pub slope_without_coarsest: Option<f64>,
}

fn weight(e: &McEstimate) -> f64 {
    // inverse variance of log(mean) by the delta method
    let rel = e.relative_half_width();
    if rel > 0.0 && rel.is_finite() {
        1.0 / (rel * rel)
    } else {
        1.0
    }
}

impl RateReport {
    pub fn new(sweep_var: &str, mut rows: Vec<RateRow>) -> Self {
        rows.sort_by(|a, b| a.scale.partial_cmp(&b.scale).unwrap_or(std::cmp::Ordering::Equal).reverse());
        let pick = |use_v: bool, skip_coarsest: bool| -> Option<RateFit> {
            let mut pts: Vec<(f64, f64, f64)> = rows
                .iter()
                .filter_map(|r| {
                    let e = if use_v { r.v.as_ref() } else { r.l2.as_ref() };
                    r.fit_eligible(e).then(|| {
                        let e = e.expect("eligible rows have estimates");
                        (r.scale, e.mean, weight(e))
                    })
                })
                .collect();
            if skip_coarsest && !pts.is_empty() {
                pts.remove(0);
            }
            fit_rate(&pts).ok()
        };
        let fit = pick(false, false);
        let fit_v = pick(true, false);
        let slope_without_coarsest = pick(false, true).map(|f| f.slope);
        Self {
            sweep_var: sweep_var.to_string(),
            rows,
            fit,
            fit_v,
            slope_without_coarsest,
        }
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn aborted_levels(&self) -> Vec<&RateRow> {
        self.rows.iter().filter(|r| r.aborted()).collect()
    }

    /// First aborted level as an error, if any.
    pub fn check_aborted(&self) -> Result<()> {
        match self.aborted_levels().first() {
            Some(r) => Err(Error::LevelAborted {
                level: r.level,
                invalid: r.invalid,
                total: r.replicates,
            }),
            None => Ok(()),
        }
    }

    /// `rates.csv` layout; fitted slopes (against `k = T/N` or
    /// `h = L sqrt(2)/n`) go into trailing comment lines.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "sweep_var,level,mean_err_L2sq,ci_half,mean_err_Vsq,ci_half_V,replicates,invalid"
        )?;
        let num = |e: Option<&McEstimate>, f: fn(&McEstimate) -> f64| e.map(f).map_or("nan".to_string(), |v| format!("{v:.10e}"));
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                self.sweep_var,
                r.level,
                num(r.l2.as_ref(), |e| e.mean),
                num(r.l2.as_ref(), |e| e.ci_half),
                num(r.v.as_ref(), |e| e.mean),
                num(r.v.as_ref(), |e| e.ci_half),
                r.replicates,
                r.invalid
            )?;
        }
        for (name, fit) in [("L2sq", self.fit), ("Vsq", self.fit_v)] {
            if let Some(f) = fit {
                writeln!(
                    w,
                    "# fit {name}: slope={:.6} slope_se={:.6} intercept={:.6} r2={:.6} points={}",
                    f.slope, f.slope_std_error, f.intercept, f.r_squared, f.points
                )?;
            }
        }
        if let Some(s) = self.slope_without_coarsest {
            writeln!(w, "# fit L2sq without coarsest: slope={s:.6}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64, f64)> = [1.0, 0.5, 0.25, 0.125].iter().map(|&s| (s, s * s, 1.0)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let pts: Vec<(f64, f64, f64)> = [1.0, 2.0, 4.0].iter().map(|&s| (s, 3.0, 1.0)).collect();
        assert!(fit_rate(&pts).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        assert!(matches!(
            fit_rate(&[(1.0, 1.0, 1.0), (2.0, 2.0, 1.0), (3.0, -1.0, 1.0)]),
            Err(Error::InsufficientPoints { usable: 2 })
        ));
    }

    #[test]
    fn noisy_unit_slope() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<(f64, f64, f64)> = (0..100)
            .map(|i| {
                let s = 1e-3 * 1.07f64.powi(i);
                (s, 3.0 * s * (1.0 + 0.01 * rng.random_range(-1.0..1.0)), 1.0)
            })
            .collect();
        let f = fit_rate(&pts).unwrap();
        assert!((0.98..=1.02).contains(&f.slope), "{}", f.slope);
    }

    proptest! {
        #[test]
        fn recovers_any_power(c in 0.01f64..100.0, n in -3.0f64..4.0, w in prop::collection::vec(0.1f64..10.0, 5)) {
            let pts: Vec<(f64, f64, f64)> = w
                .iter()
                .enumerate()
                .map(|(i, &wt)| {
                    let k = 0.5f64.powi(i as i32);
                    (k, c * k.powf(n), wt)
                })
                .collect();
            let f = fit_rate(&pts).unwrap();
            prop_assert!((f.slope - n).abs() < 1e-10);
            prop_assert!((f.intercept - c.ln()).abs() < 1e-9);
        }
    }

    fn row(level: usize, mean: f64, ci: f64, invalid: usize) -> RateRow {
        RateRow {
            level,
            scale: 1.0 / level as f64,
            l2: Some(McEstimate { mean, ci_half: ci, count: 32 }),
            v: None,
            replicates: 32,
            invalid,
        }
    }

    #[test]
    fn report_filters_and_orders_rows() {
        let rows = vec![
            row(16, 1.0 / 16.0, 0.001, 0),
            row(4, 0.25, 0.01, 0),
            row(8, 0.125, 0.1, 0), // too noisy for the fit
            row(32, 1.0 / 32.0, 0.001, 0),
            row(64, 1.0 / 64.0, 0.001, 4), // aborted
        ];
        let rep = RateReport::new("N", rows);
        assert_eq!(rep.rows.iter().map(|r| r.level).collect::<Vec<_>>(), vec![4, 8, 16, 32, 64]);
        let f = rep.fit.unwrap();
        assert_eq!(f.points, 3);
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!(rep.fit_v.is_none());
        assert!(rep.slope_without_coarsest.is_none());
        assert!(matches!(rep.check_aborted(), Err(Error::LevelAborted { level: 64, invalid: 4, total: 32 })));
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep_var,level,mean_err_L2sq,ci_half,mean_err_Vsq,ci_half_V,replicates,invalid\n"));
        assert_eq!(text.lines().filter(|l| l.starts_with("N,")).count(), 5);
        assert!(text.contains("# fit L2sq: slope=1.000000"));
    }

    #[test]
    fn row_from_samples_counts_invalid() {
        let l2 = [Some(1.0), None, Some(3.0)];
        let r = RateRow::from_samples(8, 0.125, &l2, &l2);
        assert_eq!(r.replicates, 3);
        assert_eq!(r.invalid, 1);
        assert!(r.aborted());
        assert_eq!(r.l2.unwrap().mean, 2.0);
    }
}
