//! Independent reference computations used by unit tests.

use num_complex::Complex64;

use crate::spectral::SpectralField;

/// Direct convolution sum of `(u . grad) v` over the lattice, unprojected.
pub fn convolution_advection(u: &SpectralField, v: &SpectralField) -> SpectralField {
    let g = *u.grid();
    let m = g.cutoff() as i64;
    let mut out = SpectralField::zeros(g);
    let i = Complex64::new(0.0, 1.0);
    for (_, p1, p2) in g.modes() {
        for (_, q1, q2) in g.modes() {
            let (k1, k2) = (p1 + q1, p2 + q2);
            if k1.abs() > m || k2.abs() > m || (k1, k2) == (0, 0) {
                continue;
            }
            let up = u.coefficient(p1, p2);
            let vq = v.coefficient(q1, q2);
            let kq = g.wavevector(q1, q2);
            let dot = up[0] * i * kq[0] + up[1] * i * kq[1];
            let idx = g.index(k1, k2);
            let c = &mut out.coefficients_mut()[idx];
            c[0] += dot * vq[0];
            c[1] += dot * vq[1];
        }
    }
    out
}

/// Real coordinates of a solenoidal field: `(Re s_k, Im s_k)` per half mode,
/// where `c_k = s_k e_k`.
pub fn to_real_coords(f: &SpectralField) -> Vec<f64> {
    let g = f.grid();
    let mut out = Vec::new();
    for (k1, k2) in g.half_modes() {
        let e = g.solenoidal_direction(k1, k2);
        let c = f.coefficient(k1, k2);
        let s = c[0] * e[0] + c[1] * e[1];
        out.push(s.re);
        out.push(s.im);
    }
    out
}

pub fn from_real_coords(template: &SpectralField, x: &[f64]) -> SpectralField {
    let g = *template.grid();
    let mut f = SpectralField::zeros(g);
    for (h, (k1, k2)) in g.half_modes().into_iter().enumerate() {
        let e = g.solenoidal_direction(k1, k2);
        let s = Complex64::new(x[2 * h], x[2 * h + 1]);
        f.set_pair(k1, k2, [s * e[0], s * e[1]]);
    }
    f
}

/// Gaussian elimination with partial pivoting on a dense row-major system.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for c in row + 1..n {
            s -= a[row][c] * x[c];
        }
        x[row] = s / a[row][row];
    }
    x
}
