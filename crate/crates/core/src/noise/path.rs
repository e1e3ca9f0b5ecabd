use std::io::{Read, Write};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::qspec::QSpec;
use crate::error::{Error, Result};
use crate::spectral::{SpectralField, SpectralGrid};
use crate::util::pairwise_sum;

const PATH_MAGIC: &[u8; 4] = b"NSW1";

/// Random-stream families. Each Gaussian channel `(k, c)` gets its own
/// ChaCha stream inside a family so draws do not depend on the mode cutoff.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Family {
    Path = 0,
    Auxiliary = 1,
    Initial = 2,
}

pub(crate) fn stream_id(family: Family, k1: i64, k2: i64, channel: usize) -> u64 {
    const OFFSET: i64 = 1 << 21;
    let a = (k1 + OFFSET) as u64;
    let b = (k2 + OFFSET) as u64;
    ((family as u64) << 56) | (a << 24) | (b << 2) | channel as u64
}

pub(crate) fn normals(seed: u64, stream: u64, count: usize, scale: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    (0..count)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Coefficient at `+k` of `sqrt(q) (a cos + b sin)(kappa . x) e_k` with
/// `e_k` the unit solenoidal direction and the basis normalized in L^2.
pub(crate) fn channel_coefficient(grid: &SpectralGrid, k1: i64, k2: i64, q: f64, a: f64, b: f64) -> [Complex64; 2] {
    let e = grid.solenoidal_direction(k1, k2);
    let s = q.sqrt() / (std::f64::consts::SQRT_2 * grid.length());
    let c = Complex64::new(s * a, -s * b);
    [c * e[0], c * e[1]]
}

/// Brownian increments `Delta beta` of every noise channel on the finest
/// time grid. Two real channels (cosine and sine) per Hermitian pair.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    q: QSpec,
    n_fine: usize,
    horizon: f64,
    seed: u64,
    half_modes: Vec<(i64, i64)>,
    /// `2 * h + c` for half mode `h` and channel `c`; empty when `q_k = 0`.
    channels: Vec<Vec<f64>>,
}

/// Samples the fine-grid Brownian increments (variance `T / n_fine`).
pub fn sample_path(q: &QSpec, n_fine: usize, horizon: f64, seed: u64) -> Result<NoisePath> {
    if n_fine == 0 || !n_fine.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "fine step count must be a power of two, got {n_fine}"
        )));
    }
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "time horizon must be positive, got {horizon}"
        )));
    }
    let half_modes = q.grid().half_modes();
    let sd = (horizon / n_fine as f64).sqrt();
    let channels = (0..2 * half_modes.len())
        .into_par_iter()
        .map(|slot| {
            let (k1, k2) = half_modes[slot / 2];
            if q.variance(k1, k2) == 0.0 {
                Vec::new()
            } else {
                normals(seed, stream_id(Family::Path, k1, k2, slot % 2), n_fine, sd)
            }
        })
        .collect();
    Ok(NoisePath {
        q: q.clone(),
        n_fine,
        horizon,
        seed,
        half_modes,
        channels,
    })
}

impl NoisePath {
    pub fn qspec(&self) -> &QSpec {
        &self.q
    }

    pub fn grid(&self) -> &SpectralGrid {
        self.q.grid()
    }

    pub fn fine_steps(&self) -> usize {
        self.n_fine
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn half_modes(&self) -> &[(i64, i64)] {
        &self.half_modes
    }

    fn slot(&self, k1: i64, k2: i64) -> Option<usize> {
        self.half_modes.binary_search(&(k1, k2)).ok()
    }

    /// Number of fine steps per coarse step.
    pub fn coarsening_ratio(&self, n: usize) -> Result<usize> {
        if n == 0 || self.n_fine % n != 0 {
            return Err(Error::TimeGridMismatch(format!(
                "{n} steps do not divide the fine grid of {} steps",
                self.n_fine
            )));
        }
        Ok(self.n_fine / n)
    }

    /// Fine increments of one channel (`0` cosine, `1` sine) of a half mode.
    /// Empty when the mode carries no noise.
    pub fn fine_channel(&self, k1: i64, k2: i64, channel: usize) -> Option<&[f64]> {
        self.slot(k1, k2)
            .map(|h| self.channels[2 * h + channel].as_slice())
    }

    /// Channel increments on a grid of `n` steps, each the pairwise sum of
    /// its aligned fine block. Nested dyadic grids therefore agree bitwise.
    pub fn coarse_channel(&self, k1: i64, k2: i64, channel: usize, n: usize) -> Result<Vec<f64>> {
        let r = self.coarsening_ratio(n)?;
        let fine = self.fine_channel(k1, k2, channel).ok_or_else(|| {
            Error::InvalidParameter(format!("({k1}, {k2}) is not a half-lattice mode"))
        })?;
        if fine.is_empty() {
            return Ok(vec![0.0; n]);
        }
        Ok(fine.chunks(r).map(pairwise_sum).collect())
    }

    /// Standard normals driving the stochastic-convolution part of the exact
    /// Ornstein-Uhlenbeck step, one per fine step; independent of the path.
    pub fn auxiliary_normals(&self, k1: i64, k2: i64, channel: usize) -> Vec<f64> {
        normals(self.seed, stream_id(Family::Auxiliary, k1, k2, channel), self.n_fine, 1.0)
    }

    /// `W(t_l) - W(t_{l-1})` on a grid of `n` steps, `1 <= l <= n`.
    pub fn increment_field(&self, l: usize, n: usize) -> Result<SpectralField> {
        let r = self.coarsening_ratio(n)?;
        if l == 0 || l > n {
            return Err(Error::InvalidParameter(format!(
                "increment index {l} outside 1..={n}"
            )));
        }
        let grid = *self.grid();
        let mut f = SpectralField::zeros(grid);
        for (h, &(k1, k2)) in self.half_modes.iter().enumerate() {
            let ch = [&self.channels[2 * h], &self.channels[2 * h + 1]];
            if ch[0].is_empty() {
                continue;
            }
            let block = (l - 1) * r..l * r;
            let a = pairwise_sum(&ch[0][block.clone()]);
            let b = pairwise_sum(&ch[1][block]);
            f.set_pair(k1, k2, channel_coefficient(&grid, k1, k2, self.q.variance(k1, k2), a, b));
        }
        Ok(f)
    }

    /// All `n` increments of the coarse grid, in order.
    pub fn increments(&self, n: usize) -> Result<Vec<SpectralField>> {
        let r = self.coarsening_ratio(n)?;
        let grid = *self.grid();
        let mut out = vec![SpectralField::zeros(grid); n];
        for (h, &(k1, k2)) in self.half_modes.iter().enumerate() {
            let ch = [&self.channels[2 * h], &self.channels[2 * h + 1]];
            if ch[0].is_empty() {
                continue;
            }
            let q = self.q.variance(k1, k2);
            for (l, f) in out.iter_mut().enumerate() {
                let a = pairwise_sum(&ch[0][l * r..(l + 1) * r]);
                let b = pairwise_sum(&ch[1][l * r..(l + 1) * r]);
                f.set_pair(k1, k2, channel_coefficient(&grid, k1, k2, q, a, b));
            }
        }
        Ok(out)
    }

    /// Writes the path in the `NSW1` binary layout (little endian):
    /// magic, `L`, `M`, `n_fine`, `T`, seed, power-law scale and decay, the
    /// full-lattice variances, then `n_fine` increments per channel in
    /// half-mode order (cosine before sine; zeros for noiseless modes).
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let g = self.grid();
        w.write_all(PATH_MAGIC)?;
        w.write_all(&g.length().to_le_bytes())?;
        w.write_all(&(g.cutoff() as u64).to_le_bytes())?;
        w.write_all(&(self.n_fine as u64).to_le_bytes())?;
        w.write_all(&self.horizon.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.q.scale().to_le_bytes())?;
        w.write_all(&self.q.decay().to_le_bytes())?;
        for v in self.q.variances() {
            w.write_all(&v.to_le_bytes())?;
        }
        let zeros = vec![0.0; self.n_fine];
        for ch in &self.channels {
            let data = if ch.is_empty() { &zeros } else { ch };
            for v in data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != PATH_MAGIC {
            return Err(Error::Format(format!(
                "expected noise path magic NSW1, found {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let length = read_f64(&mut r)?;
        let cutoff = read_u64(&mut r)? as usize;
        let n_fine = read_u64(&mut r)? as usize;
        let horizon = read_f64(&mut r)?;
        let seed = read_u64(&mut r)?;
        let scale = read_f64(&mut r)?;
        let decay = read_f64(&mut r)?;
        let grid = SpectralGrid::new(length, cutoff)?;
        if n_fine == 0 || !n_fine.is_power_of_two() || n_fine > 1 << 32 {
            return Err(Error::Format(format!("invalid fine step count {n_fine}")));
        }
        let mut variances = vec![0.0; grid.lattice_len()];
        for v in variances.iter_mut() {
            *v = read_f64(&mut r)?;
        }
        let q = QSpec::restore(grid, scale, decay, variances)?;
        let half_modes = grid.half_modes();
        let mut channels = Vec::with_capacity(2 * half_modes.len());
        for slot in 0..2 * half_modes.len() {
            let (k1, k2) = half_modes[slot / 2];
            let mut data = vec![0.0; n_fine];
            for v in data.iter_mut() {
                *v = read_f64(&mut r)?;
            }
            channels.push(if q.variance(k1, k2) == 0.0 { Vec::new() } else { data });
        }
        Ok(Self {
            q,
            n_fine,
            horizon,
            seed,
            half_modes,
            channels,
        })
    }
}

pub(crate) fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Gaussian divergence-free field with covariance `cov`, drawn from a stream
/// family disjoint from the noise path.
pub fn sample_gaussian_u0(cov: &QSpec, seed: u64) -> SpectralField {
    let grid = *cov.grid();
    let mut f = SpectralField::zeros(grid);
    for (k1, k2) in grid.half_modes() {
        let q = cov.variance(k1, k2);
        if q == 0.0 {
            continue;
        }
        let a = normals(seed, stream_id(Family::Initial, k1, k2, 0), 1, 1.0)[0];
        let b = normals(seed, stream_id(Family::Initial, k1, k2, 1), 1, 1.0)[0];
        f.set_pair(k1, k2, channel_coefficient(&grid, k1, k2, q, a, b));
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::DecayCheck;
    use crate::util::mean_sd;
    use std::f64::consts::PI;

    fn qspec(m: usize, c: f64) -> QSpec {
        let g = SpectralGrid::new(2.0 * PI, m).unwrap();
        QSpec::power_law(g, c, 2.5, DecayCheck::Reject).unwrap()
    }

    #[test]
    fn zero_noise_gives_zero_increments() {
        let p = sample_path(&qspec(3, 0.0), 8, 1.0, 1).unwrap();
        for f in p.increments(4).unwrap() {
            assert_eq!(f.l2_norm(), 0.0);
        }
        assert_eq!(p.coarse_channel(1, 0, 0, 2).unwrap(), vec![0.0; 2]);
    }

    #[test]
    fn deterministic_in_seed() {
        let q = qspec(4, 1.0);
        let a = sample_path(&q, 64, 1.0, 42).unwrap();
        let b = sample_path(&q, 64, 1.0, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_path(&q, 64, 1.0, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draws_do_not_depend_on_cutoff() {
        let small = sample_path(&qspec(2, 1.0), 32, 1.0, 7).unwrap();
        let large = sample_path(&qspec(5, 1.0), 32, 1.0, 7).unwrap();
        for &(k1, k2) in small.half_modes() {
            for c in 0..2 {
                assert_eq!(small.fine_channel(k1, k2, c), large.fine_channel(k1, k2, c));
            }
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let q = qspec(2, 1.0);
        assert!(sample_path(&q, 12, 1.0, 0).is_err());
        assert!(sample_path(&q, 16, 0.0, 0).is_err());
        let p = sample_path(&q, 16, 1.0, 0).unwrap();
        assert!(matches!(p.increment_field(1, 3), Err(Error::TimeGridMismatch(_))));
        assert!(p.increment_field(0, 4).is_err());
        assert!(p.increment_field(5, 4).is_err());
    }

    #[test]
    fn dyadic_coarsening_telescopes_bitwise() {
        let p = sample_path(&qspec(3, 1.0), 256, 1.0, 3).unwrap();
        for &(k1, k2) in p.half_modes() {
            for c in 0..2 {
                let total = p.coarse_channel(k1, k2, c, 1).unwrap()[0];
                for n in [2, 4, 16, 256] {
                    let coarse = p.coarse_channel(k1, k2, c, n).unwrap();
                    assert_eq!(pairwise_sum(&coarse).to_bits(), total.to_bits());
                    let finer = p.coarse_channel(k1, k2, c, 2 * n.min(128)).unwrap();
                    if n < 256 {
                        let pairs: Vec<f64> = finer.chunks(2).map(pairwise_sum).collect();
                        assert_eq!(pairs, coarse);
                    }
                }
            }
        }
        let end = p.increment_field(1, 1).unwrap();
        let fine = p.increment_field(1, 256).unwrap();
        assert_eq!(fine.coefficients(), p.increments(256).unwrap()[0].coefficients());
        let mut sum = SpectralField::zeros(*p.grid());
        for f in p.increments(16).unwrap() {
            sum.axpy(1.0, &f);
        }
        assert!(sum.difference(&end).l2_norm() < 1e-14 * end.l2_norm());
        assert!(end.is_divergence_free(1e-12));
    }

    #[test]
    fn increment_variance() {
        let q = qspec(2, 1.0);
        let n = 1 << 14;
        let t = 2.0;
        let p = sample_path(&q, n, t, 11).unwrap();
        let delta = t / n as f64;
        for &(k1, k2) in p.half_modes() {
            for c in 0..2 {
                let x = p.fine_channel(k1, k2, c).unwrap();
                let sq: Vec<f64> = x.iter().map(|v| v * v).collect();
                let (m, s) = mean_sd(&sq).unwrap();
                let se = s / (n as f64).sqrt();
                assert!((m - delta).abs() < 5.0 * se, "({k1},{k2},{c}): {m} vs {delta}");
            }
        }
    }

    #[test]
    fn ito_isometry() {
        let q = qspec(3, 0.7);
        let n = 4096;
        let p = sample_path(&q, n, 1.0, 5).unwrap();
        let norms: Vec<f64> = p.increments(n).unwrap().iter().map(|f| f.l2_norm_sq()).collect();
        let (m, s) = mean_sd(&norms).unwrap();
        let expect = q.trace() / n as f64;
        assert!((m - expect).abs() < 5.0 * s / (n as f64).sqrt(), "{m} vs {expect}");
        // quadrupling the covariance doubles every increment
        let p4 = sample_path(&q.scaled(4.0), n, 1.0, 5).unwrap();
        let a = p.increment_field(7, n).unwrap().l2_norm();
        let b = p4.increment_field(7, n).unwrap().l2_norm();
        assert!((b - 2.0 * a).abs() < 1e-14 * b);
    }

    #[test]
    fn distinct_channels_uncorrelated() {
        let p = sample_path(&qspec(1, 1.0), 1 << 14, 1.0, 8).unwrap();
        let x = p.fine_channel(1, 0, 0).unwrap();
        let y = p.fine_channel(1, 1, 1).unwrap();
        let prod: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
        let (m, s) = mean_sd(&prod).unwrap();
        assert!(m.abs() < 5.0 * s / (prod.len() as f64).sqrt());
        let lag: Vec<f64> = x.windows(2).map(|w| w[0] * w[1]).collect();
        let (m, s) = mean_sd(&lag).unwrap();
        assert!(m.abs() < 5.0 * s / (lag.len() as f64).sqrt());
    }

    #[test]
    fn binary_roundtrip() {
        let g = SpectralGrid::new(2.0 * PI, 3).unwrap();
        let q = QSpec::single_pair(g, 1, 2, 0.3).unwrap();
        for q in [q, qspec(3, 0.5)] {
            let p = sample_path(&q, 16, 1.5, 9).unwrap();
            let mut buf = Vec::new();
            p.write_to(&mut buf).unwrap();
            let back = NoisePath::read_from(buf.as_slice()).unwrap();
            assert!(back.qspec().variances() == p.qspec().variances());
            assert_eq!(back.channels, p.channels);
            assert_eq!(back.horizon(), p.horizon());
            let mut again = Vec::new();
            back.write_to(&mut again).unwrap();
            assert_eq!(buf, again);
        }
        let mut bad = b"NST1".to_vec();
        bad.extend_from_slice(&[0u8; 64]);
        assert!(matches!(NoisePath::read_from(bad.as_slice()), Err(Error::Format(_))));
    }

    #[test]
    fn gaussian_initial_condition() {
        let g = SpectralGrid::new(2.0 * PI, 3).unwrap();
        let zero = QSpec::power_law(g, 0.0, 3.0, DecayCheck::Reject).unwrap();
        assert_eq!(sample_gaussian_u0(&zero, 1).l2_norm(), 0.0);
        let cov = QSpec::power_law(g, 0.2, 3.0, DecayCheck::Reject).unwrap();
        let m = 4000;
        let v: Vec<f64> = (0..m).map(|s| sample_gaussian_u0(&cov, s).v_norm_sq()).collect();
        let (mean, sd) = mean_sd(&v).unwrap();
        assert!((mean - cov.k0()).abs() < 5.0 * sd / (m as f64).sqrt());
        let u = sample_gaussian_u0(&cov, 3);
        assert!(u.is_divergence_free(1e-12) && u.hermitian_residual() == 0.0);
        // independent of the path stream with the same seed
        let p = sample_path(&cov, 1, 1.0, 3).unwrap();
        let a = p.fine_channel(1, 0, 0).unwrap()[0];
        assert_ne!(a, u.coefficient(1, 0)[1].re);
    }

    #[test]
    fn gaussian_exponential_moment_below_threshold() {
        // E exp(g lambda q X^2) = (1 - 2 g lambda q)^{-1/2} per channel; two channels
        let g = SpectralGrid::new(2.0 * PI, 1).unwrap();
        let cov = QSpec::single_pair(g, 1, 0, 0.5).unwrap();
        let gamma = 0.1 / cov.max_weighted_variance();
        let m = 20000;
        let vals: Vec<f64> = (0..m)
            .map(|s| (gamma * sample_gaussian_u0(&cov, s).v_norm_sq()).exp())
            .collect();
        let (mean, sd) = mean_sd(&vals).unwrap();
        let expect = 1.0 / (1.0 - 2.0 * gamma * 0.5);
        assert!((mean - expect).abs() < 5.0 * sd / (m as f64).sqrt(), "{mean} vs {expect}");
    }
}
