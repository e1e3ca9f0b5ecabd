use num_complex::Complex64;
use rand::Rng;

use super::grid::SpectralGrid;
use crate::error::{Error, Result};

/// Fourier coefficients of a mean-zero periodic vector field.
///
/// The field is `f(x) = sum_k c_k exp(i kappa_k . x)` over the retained
/// lattice, so that `|f|_{L^2}^2 = L^2 sum_k |c_k|^2`. Real-valued fields
/// satisfy `c_{-k} = conj(c_k)`; every constructor in this crate preserves it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: SpectralGrid,
    coeffs: Vec<[Complex64; 2]>,
}

const ZERO: [Complex64; 2] = [Complex64::new(0.0, 0.0); 2];

impl SpectralField {
    pub fn zeros(grid: SpectralGrid) -> Self {
        Self {
            grid,
            coeffs: vec![ZERO; grid.lattice_len()],
        }
    }

    /// Wraps a full-lattice coefficient array; the mean mode is cleared.
    pub fn from_coefficients(grid: SpectralGrid, mut coeffs: Vec<[Complex64; 2]>) -> Result<Self> {
        if coeffs.len() != grid.lattice_len() {
            return Err(Error::GridMismatch(format!(
                "expected {} coefficients, got {}",
                grid.lattice_len(),
                coeffs.len()
            )));
        }
        coeffs[grid.zero_index()] = ZERO;
        Ok(Self { grid, coeffs })
    }

    /// Field with a single Hermitian pair: coefficient `c` at `k` and its
    /// conjugate at `-k`.
    pub fn single_mode(grid: SpectralGrid, k1: i64, k2: i64, c: [Complex64; 2]) -> Result<Self> {
        if (k1, k2) == (0, 0) || !grid.contains(k1, k2) {
            return Err(Error::InvalidParameter(format!(
                "mode ({k1}, {k2}) is not a retained mode"
            )));
        }
        let mut f = Self::zeros(grid);
        f.set_pair(k1, k2, c);
        Ok(f)
    }

    /// Divergence-free field `a cos(kappa.x + phase) * kappa^perp/|kappa|`.
    pub fn solenoidal_mode(grid: SpectralGrid, k1: i64, k2: i64, amplitude: f64, phase: f64) -> Result<Self> {
        let e = grid.solenoidal_direction(k1, k2);
        let c = Complex64::from_polar(0.5 * amplitude, phase);
        Self::single_mode(grid, k1, k2, [c * e[0], c * e[1]])
    }

    /// Random divergence-free field with `E|c_k|^2` proportional to
    /// `lambda_k^{-decay}`, normalized to unit `L^2` norm (zero field if the
    /// lattice is empty).
    pub fn random_solenoidal<R: Rng + ?Sized>(grid: SpectralGrid, rng: &mut R, decay: f64) -> Self {
        let mut f = Self::zeros(grid);
        for (k1, k2) in grid.half_modes() {
            let s = grid.eigenvalue(k1, k2).powf(-0.5 * decay);
            let a = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * s;
            let e = grid.solenoidal_direction(k1, k2);
            f.set_pair(k1, k2, [a * e[0], a * e[1]]);
        }
        let n = f.l2_norm();
        if n > 0.0 {
            f.scale_mut(1.0 / n);
        }
        f
    }

    /// Sets coefficient `c` at `k` and `conj(c)` at `-k`.
    pub fn set_pair(&mut self, k1: i64, k2: i64, c: [Complex64; 2]) {
        let i = self.grid.index(k1, k2);
        let j = self.grid.index(-k1, -k2);
        self.coeffs[i] = c;
        self.coeffs[j] = [c[0].conj(), c[1].conj()];
    }

    #[inline]
    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    #[inline]
    pub fn coefficients(&self) -> &[[Complex64; 2]] {
        &self.coeffs
    }

    #[inline]
    pub fn coefficients_mut(&mut self) -> &mut [[Complex64; 2]] {
        &mut self.coeffs
    }

    #[inline]
    pub fn coefficient(&self, k1: i64, k2: i64) -> [Complex64; 2] {
        self.coeffs[self.grid.index(k1, k2)]
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "(L={}, M={}) vs (L={}, M={})",
                self.grid.length(),
                self.grid.cutoff(),
                other.grid.length(),
                other.grid.cutoff()
            )));
        }
        Ok(())
    }

    /// Leray projection, `c_k -> (I - kappa kappa^T / |kappa|^2) c_k`.
    pub fn leray_project(&self) -> Self {
        let mut out = self.clone();
        out.leray_project_mut();
        out
    }

    pub fn leray_project_mut(&mut self) {
        let grid = self.grid;
        for (i, k1, k2) in grid.modes() {
            let [a, b] = grid.wavevector(k1, k2);
            let lam = a * a + b * b;
            let c = self.coeffs[i];
            let dot = (c[0] * a + c[1] * b) / lam;
            self.coeffs[i] = [c[0] - dot * a, c[1] - dot * b];
        }
    }

    /// Gradient (complementary) part `f - P f`.
    pub fn gradient_part(&self) -> Self {
        let p = self.leray_project();
        let mut out = self.clone();
        out.axpy(-1.0, &p);
        out
    }

    /// `c_k -> lambda_k^s c_k`, i.e. `A^s`.
    pub fn apply_stokes_power(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.apply_stokes_power_mut(s);
        out
    }

    pub fn apply_stokes_power_mut(&mut self, s: f64) {
        if s == 0.0 {
            return;
        }
        let grid = self.grid;
        for (i, k1, k2) in grid.modes() {
            let w = stokes_weight(grid.eigenvalue(k1, k2), s);
            self.coeffs[i][0] *= w;
            self.coeffs[i][1] *= w;
        }
    }

    /// Diagonal map `c_k -> g(lambda_k) c_k`.
    pub fn map_diagonal_mut(&mut self, mut g: impl FnMut(f64) -> f64) {
        let grid = self.grid;
        for (i, k1, k2) in grid.modes() {
            let w = g(grid.eigenvalue(k1, k2));
            self.coeffs[i][0] *= w;
            self.coeffs[i][1] *= w;
        }
    }

    /// `|A^{s/2} f|_{L^2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        let grid = self.grid;
        let l2 = grid.length() * grid.length();
        let mut acc = 0.0;
        for (i, k1, k2) in grid.modes() {
            let c = self.coeffs[i];
            let e = c[0].norm_sqr() + c[1].norm_sqr();
            if e != 0.0 {
                acc += stokes_weight(grid.eigenvalue(k1, k2), s) * e;
            }
        }
        l2 * acc
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_norm(0.0)
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.sobolev_norm_sq(0.0)
    }

    /// `|A^{1/2} f|^2`, the squared V seminorm.
    pub fn v_norm_sq(&self) -> f64 {
        self.sobolev_norm_sq(1.0)
    }

    /// `L^2` inner product `(f, g)`.
    pub fn inner(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.grid, other.grid);
        let l2 = self.grid.length() * self.grid.length();
        let acc: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a[0] * b[0].conj()).re + (a[1] * b[1].conj()).re)
            .sum();
        l2 * acc
    }

    /// Weighted inner product `(A^{s/2} f, A^{s/2} g)`.
    pub fn inner_sobolev(&self, other: &Self, s: f64) -> f64 {
        let grid = self.grid;
        let l2 = grid.length() * grid.length();
        let mut acc = 0.0;
        for (i, k1, k2) in grid.modes() {
            let a = self.coeffs[i];
            let b = other.coeffs[i];
            let d = (a[0] * b[0].conj()).re + (a[1] * b[1].conj()).re;
            if d != 0.0 {
                acc += stokes_weight(grid.eigenvalue(k1, k2), s) * d;
            }
        }
        l2 * acc
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        debug_assert_eq!(self.grid, other.grid);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            a[0] += b[0] * alpha;
            a[1] += b[1] * alpha;
        }
    }

    pub fn scale_mut(&mut self, alpha: f64) {
        for c in &mut self.coeffs {
            c[0] *= alpha;
            c[1] *= alpha;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale_mut(alpha);
        out
    }

    pub fn difference(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Largest `|kappa_k . c_k| / (|kappa_k| max_k |c_k|)`; zero for solenoidal fields.
    pub fn divergence_residual(&self) -> f64 {
        let grid = self.grid;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (i, k1, k2) in grid.modes() {
            let [a, b] = grid.wavevector(k1, k2);
            let c = self.coeffs[i];
            let d = (c[0] * a + c[1] * b).norm() / (a * a + b * b).sqrt();
            worst = worst.max(d);
            scale = scale.max((c[0].norm_sqr() + c[1].norm_sqr()).sqrt());
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Largest `|c_{-k} - conj(c_k)|`, relative to the largest coefficient.
    pub fn hermitian_residual(&self) -> f64 {
        let grid = self.grid;
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (i, k1, k2) in grid.modes() {
            let c = self.coeffs[i];
            let d = self.coeffs[grid.index(-k1, -k2)];
            worst = worst.max((d[0] - c[0].conj()).norm().max((d[1] - c[1].conj()).norm()));
            scale = scale.max(c[0].norm().max(c[1].norm()));
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn is_divergence_free(&self, tol: f64) -> bool {
        self.divergence_residual() <= tol
    }

    /// Spectral partial derivative `d/dx_axis` of component `comp`, as a
    /// scalar coefficient array.
    pub fn derivative(&self, comp: usize, axis: usize) -> Vec<Complex64> {
        let grid = self.grid;
        let mut out = vec![Complex64::new(0.0, 0.0); grid.lattice_len()];
        for (i, k1, k2) in grid.modes() {
            let kv = grid.wavevector(k1, k2);
            out[i] = self.coeffs[i][comp] * Complex64::new(0.0, kv[axis]);
        }
        out
    }

    pub fn component(&self, comp: usize) -> Vec<Complex64> {
        self.coeffs.iter().map(|c| c[comp]).collect()
    }

    /// Re-expresses the field on another lattice with the same domain length,
    /// dropping modes beyond the target cutoff.
    pub fn resample(&self, target: SpectralGrid) -> Result<Self> {
        if target.length() != self.grid.length() {
            return Err(Error::GridMismatch("domain lengths differ".into()));
        }
        let mut out = Self::zeros(target);
        let m = target.cutoff().min(self.grid.cutoff()) as i64;
        for k1 in -m..=m {
            for k2 in -m..=m {
                if (k1, k2) != (0, 0) {
                    out.coeffs[target.index(k1, k2)] = self.coeffs[self.grid.index(k1, k2)];
                }
            }
        }
        Ok(out)
    }

    /// Point evaluation of the truncated series.
    pub fn eval(&self, x: f64, y: f64) -> [f64; 2] {
        let grid = self.grid;
        let mut acc = [0.0; 2];
        for (i, k1, k2) in grid.modes() {
            let [a, b] = grid.wavevector(k1, k2);
            let e = Complex64::from_polar(1.0, a * x + b * y);
            let c = self.coeffs[i];
            acc[0] += (c[0] * e).re;
            acc[1] += (c[1] * e).re;
        }
        acc
    }
}

#[inline]
pub(crate) fn stokes_weight(lambda: f64, s: f64) -> f64 {
    if s == 0.0 {
        1.0
    } else if s == 1.0 {
        lambda
    } else if s == 2.0 {
        lambda * lambda
    } else {
        lambda.powf(s)
    }
}
