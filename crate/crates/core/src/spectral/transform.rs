use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::SpectralField;
use super::grid::SpectralGrid;
use crate::error::{Error, Result};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized 2D transform of a row-major `n x n` array.
pub(crate) fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    debug_assert_eq!(data.len(), n * n);
    let fft = plan(n, inverse);
    fft.process(data);
    transpose(data, n);
    fft.process(data);
    transpose(data, n);
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Samples of a vector field on the uniform `n x n` grid `x = (i, j) L / n`.
/// Storage is row-major with the x index outermost.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalField {
    pub n: usize,
    pub length: f64,
    pub values: [Vec<f64>; 2],
}

impl PhysicalField {
    pub fn zeros(n: usize, length: f64) -> Self {
        Self {
            n,
            length,
            values: [vec![0.0; n * n], vec![0.0; n * n]],
        }
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> [f64; 2] {
        let p = ix * self.n + iy;
        [self.values[0][p], self.values[1][p]]
    }

    /// Cell area times sum, i.e. the rectangle rule (exact for trigonometric
    /// polynomials of degree below `n`).
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        let h = self.length / self.n as f64;
        let mut acc = 0.0;
        for p in 0..self.n * self.n {
            acc += f([self.values[0][p], self.values[1][p]]);
        }
        acc * h * h
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.integrate(|v| v[0] * v[0] + v[1] * v[1])
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.integrate(|v| (v[0] * v[0] + v[1] * v[1]).powf(0.5 * p))
            .powf(1.0 / p)
    }

    pub fn max_magnitude(&self) -> f64 {
        let mut m: f64 = 0.0;
        for p in 0..self.n * self.n {
            m = m.max(self.values[0][p].hypot(self.values[1][p]));
        }
        m
    }
}

/// Folds two real-valued scalar coefficient arrays into one complex `n x n`
/// array `F + iG` (modes taken modulo `n`).
pub(crate) fn fold_pair(
    grid: &SpectralGrid,
    f: &[Complex64],
    g: &[Complex64],
    n: usize,
) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    let i = Complex64::new(0.0, 1.0);
    for (idx, k1, k2) in grid.modes() {
        let a = k1.rem_euclid(n as i64) as usize;
        let b = k2.rem_euclid(n as i64) as usize;
        out[a * n + b] += f[idx] + i * g[idx];
    }
    out
}

/// Evaluates two real scalar series on the `n x n` grid (any `n >= 1`).
pub(crate) fn synthesize_pair(
    grid: &SpectralGrid,
    f: &[Complex64],
    g: &[Complex64],
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut buf = fold_pair(grid, f, g, n);
    fft2(&mut buf, n, true);
    (buf.iter().map(|z| z.re).collect(), buf.iter().map(|z| z.im).collect())
}

/// Forward transform of two real sample arrays, truncated to the lattice.
/// Requires `n > 2M` so retained modes are distinct modulo `n`.
pub(crate) fn analyze_pair(
    grid: &SpectralGrid,
    f: &[f64],
    g: &[f64],
    n: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    debug_assert!(n > 2 * grid.cutoff());
    let mut buf: Vec<Complex64> = f
        .iter()
        .zip(g)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    fft2(&mut buf, n, false);
    let norm = 1.0 / (n * n) as f64;
    let half = Complex64::new(0.5, 0.0);
    let half_i = Complex64::new(0.0, -0.5);
    let mut out_f = vec![Complex64::new(0.0, 0.0); grid.lattice_len()];
    let mut out_g = vec![Complex64::new(0.0, 0.0); grid.lattice_len()];
    let nn = n as i64;
    for (idx, k1, k2) in grid.modes() {
        let p = (k1.rem_euclid(nn) as usize) * n + k2.rem_euclid(nn) as usize;
        let q = ((-k1).rem_euclid(nn) as usize) * n + (-k2).rem_euclid(nn) as usize;
        let z = buf[p] * norm;
        let zc = buf[q].conj() * norm;
        out_f[idx] = (z + zc) * half;
        out_g[idx] = (z - zc) * half_i;
    }
    (out_f, out_g)
}

/// Samples `f` on its dealiased physical grid.
pub fn to_physical(f: &SpectralField) -> PhysicalField {
    to_physical_at(f, f.grid().physical_resolution())
}

/// Samples `f` on an arbitrary `n x n` grid (exact point values).
pub fn to_physical_at(f: &SpectralField, n: usize) -> PhysicalField {
    let grid = f.grid();
    let (u, v) = synthesize_pair(grid, &f.component(0), &f.component(1), n);
    PhysicalField {
        n,
        length: grid.length(),
        values: [u, v],
    }
}

/// Inverse of [`to_physical`]: projects samples on the retained modes.
pub fn from_physical(samples: &PhysicalField, grid: SpectralGrid) -> Result<SpectralField> {
    let n = grid.physical_resolution();
    if samples.n != n || samples.values[0].len() != n * n || samples.values[1].len() != n * n {
        return Err(Error::ResolutionMismatch {
            expected: n,
            got: samples.n,
        });
    }
    let (a, b) = analyze_pair(&grid, &samples.values[0], &samples.values[1], n);
    let coeffs = a.into_iter().zip(b).map(|(x, y)| [x, y]).collect();
    SpectralField::from_coefficients(grid, coeffs)
}

/// Evaluates `f` on the shifted tensor grid `(i L/n + sx, j L/n + sy)` by
/// separable summation. Used for finite-element nodes and quadrature points.
pub fn eval_shifted_grid(f: &SpectralField, n: usize, shift: [f64; 2]) -> [Vec<f64>; 2] {
    let grid = f.grid();
    let m = grid.cutoff() as i64;
    let side = grid.side();
    let w = grid.wavenumber();
    let h = grid.length() / n as f64;
    // phase tables e^{i w k (j h + s)} for k in -M..=M
    let table = |s: f64| -> Vec<Complex64> {
        let mut t = vec![Complex64::new(0.0, 0.0); side * n];
        for (a, k) in (-m..=m).enumerate() {
            for j in 0..n {
                t[a * n + j] = Complex64::from_polar(1.0, w * k as f64 * (j as f64 * h + s));
            }
        }
        t
    };
    let tx = table(shift[0]);
    let ty = table(shift[1]);
    let coeffs = f.coefficients();
    let mut out = [vec![0.0; n * n], vec![0.0; n * n]];
    let mut partial = vec![Complex64::new(0.0, 0.0); side * n];
    for comp in 0..2 {
        // partial[a][j] = sum_b c[a][b] e^{i k_b y_j}
        for a in 0..side {
            for j in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for b in 0..side {
                    acc += coeffs[a * side + b][comp] * ty[b * n + j];
                }
                partial[a * n + j] = acc;
            }
        }
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..side {
                    acc += (tx[a * n + i] * partial[a * n + j]).re;
                }
                out[comp][i * n + j] = acc;
            }
        }
    }
    out
}
