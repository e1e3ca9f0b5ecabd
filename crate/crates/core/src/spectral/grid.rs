use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Truncated Fourier lattice on the torus `[0, L]^2`.
///
/// Retained modes are the integer vectors `k` with `0 < |k|_inf <= M`. The
/// zero mode is never stored as a degree of freedom: fields are mean-zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralGrid {
    length: f64,
    cutoff: usize,
    n_phys: usize,
}

impl SpectralGrid {
    /// Builds the lattice for domain length `length` and cutoff `cutoff`.
    ///
    /// The physical resolution is the smallest 5-smooth integer strictly
    /// above `3 * cutoff`, which removes aliasing from quadratic products.
    pub fn new(length: f64, cutoff: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if cutoff < 1 {
            return Err(Error::InvalidParameter(
                "mode cutoff must be at least 1".into(),
            ));
        }
        Ok(Self {
            length,
            cutoff,
            n_phys: smooth_size_above(3 * cutoff),
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Samples per axis of the dealiased physical grid.
    pub fn physical_resolution(&self) -> usize {
        self.n_phys
    }

    /// Number of lattice points per axis, `2M + 1`.
    pub fn side(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Size of the coefficient arrays (the full square lattice, zero mode included).
    pub fn lattice_len(&self) -> usize {
        self.side() * self.side()
    }

    /// Number of retained (nonzero) modes.
    pub fn mode_count(&self) -> usize {
        self.lattice_len() - 1
    }

    /// Lexicographic position of mode `(k1, k2)` in coefficient arrays.
    #[inline]
    pub fn index(&self, k1: i64, k2: i64) -> usize {
        let m = self.cutoff as i64;
        debug_assert!(k1.abs() <= m && k2.abs() <= m);
        ((k1 + m) as usize) * self.side() + (k2 + m) as usize
    }

    #[inline]
    pub fn mode(&self, index: usize) -> (i64, i64) {
        let m = self.cutoff as i64;
        let side = self.side();
        ((index / side) as i64 - m, (index % side) as i64 - m)
    }

    #[inline]
    pub fn zero_index(&self) -> usize {
        self.index(0, 0)
    }

    pub fn contains(&self, k1: i64, k2: i64) -> bool {
        let m = self.cutoff as i64;
        k1.abs() <= m && k2.abs() <= m
    }

    #[inline]
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.length
    }

    #[inline]
    pub fn wavevector(&self, k1: i64, k2: i64) -> [f64; 2] {
        let w = self.wavenumber();
        [w * k1 as f64, w * k2 as f64]
    }

    /// Eigenvalue `|kappa_k|^2` of the Stokes operator on mode `k`.
    #[inline]
    pub fn eigenvalue(&self, k1: i64, k2: i64) -> f64 {
        let [a, b] = self.wavevector(k1, k2);
        a * a + b * b
    }

    /// Eigenvalue by lattice index; zero for the mean mode.
    #[inline]
    pub fn eigenvalue_at(&self, index: usize) -> f64 {
        let (k1, k2) = self.mode(index);
        self.eigenvalue(k1, k2)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let m = self.cutoff as i64;
        self.eigenvalue(m, m)
    }

    /// All retained modes as `(index, k1, k2)`, lexicographic.
    pub fn modes(&self) -> impl Iterator<Item = (usize, i64, i64)> + '_ {
        let zero = self.zero_index();
        (0..self.lattice_len()).filter(move |&i| i != zero).map(move |i| {
            let (k1, k2) = self.mode(i);
            (i, k1, k2)
        })
    }

    /// One representative per Hermitian pair `{k, -k}`: `k1 > 0`, or
    /// `k1 == 0 && k2 > 0`. Lexicographic in `(k1, k2)`.
    pub fn half_modes(&self) -> Vec<(i64, i64)> {
        let m = self.cutoff as i64;
        let mut out = Vec::with_capacity(self.mode_count() / 2);
        for k1 in 0..=m {
            for k2 in -m..=m {
                if k1 > 0 || k2 > 0 {
                    out.push((k1, k2));
                }
            }
        }
        out
    }

    /// Unit divergence-free direction `kappa^perp / |kappa|` for mode `k`.
    #[inline]
    pub fn solenoidal_direction(&self, k1: i64, k2: i64) -> [f64; 2] {
        let [a, b] = self.wavevector(k1, k2);
        let n = (a * a + b * b).sqrt();
        [-b / n, a / n]
    }
}

fn smooth_size_above(lower: usize) -> usize {
    let mut n = lower + 1;
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_modes() {
        let g = SpectralGrid::new(2.0 * PI, 1).unwrap();
        assert_eq!(g.mode_count(), 8);
        assert_eq!(g.modes().count(), 8);
        assert_eq!(g.half_modes().len(), 4);
    }

    #[test]
    fn eigenvalues_on_standard_torus() {
        let g = SpectralGrid::new(2.0 * PI, 2).unwrap();
        assert!((g.eigenvalue(1, 0) - 1.0).abs() < 1e-14);
        assert!((g.eigenvalue(2, 2) - 8.0).abs() < 1e-13);
        let unit = SpectralGrid::new(1.0, 1).unwrap();
        assert!((unit.eigenvalue(1, 0) - 4.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SpectralGrid::new(0.0, 4).is_err());
        assert!(SpectralGrid::new(-1.0, 4).is_err());
        assert!(SpectralGrid::new(f64::NAN, 4).is_err());
        assert!(SpectralGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn dealiased_resolution() {
        for m in 1..40 {
            let g = SpectralGrid::new(1.0, m).unwrap();
            assert!(g.physical_resolution() > 3 * m);
        }
        assert_eq!(SpectralGrid::new(1.0, 16).unwrap().physical_resolution(), 50);
    }

    #[test]
    fn index_roundtrip() {
        let g = SpectralGrid::new(1.0, 3).unwrap();
        for i in 0..g.lattice_len() {
            let (a, b) = g.mode(i);
            assert_eq!(g.index(a, b), i);
        }
        assert_eq!(g.mode(g.zero_index()), (0, 0));
    }

    #[test]
    fn half_modes_cover_each_pair_once() {
        let g = SpectralGrid::new(1.0, 3).unwrap();
        let half = g.half_modes();
        let mut seen = vec![0u8; g.lattice_len()];
        for &(a, b) in &half {
            seen[g.index(a, b)] += 1;
            seen[g.index(-a, -b)] += 1;
        }
        seen[g.zero_index()] += 1;
        assert!(seen.iter().all(|&c| c == 1));
    }
}
