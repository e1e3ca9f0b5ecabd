//! Pseudo-spectral evaluation of the convective term.

use super::field::SpectralField;
use super::transform::{analyze_pair, synthesize_pair};
use crate::error::Result;

struct PhysicalAdvection {
    n: usize,
    w: [Vec<f64>; 2],
}

fn physical_advection(u: &SpectralField, v: &SpectralField) -> Result<PhysicalAdvection> {
    u.check_same_grid(v)?;
    let grid = u.grid();
    let n = grid.physical_resolution();
    let (ux, uy) = synthesize_pair(grid, &u.component(0), &u.component(1), n);
    let (dxvx, dyvx) = synthesize_pair(grid, &v.derivative(0, 0), &v.derivative(0, 1), n);
    let (dxvy, dyvy) = synthesize_pair(grid, &v.derivative(1, 0), &v.derivative(1, 1), n);
    let mut wx = dxvx;
    let mut wy = dxvy;
    for p in 0..n * n {
        wx[p] = ux[p] * wx[p] + uy[p] * dyvx[p];
        wy[p] = ux[p] * wy[p] + uy[p] * dyvy[p];
    }
    Ok(PhysicalAdvection { n, w: [wx, wy] })
}

/// Galerkin truncation of `(u . grad) v`, without projection.
pub fn advection(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let grid = *u.grid();
    let adv = physical_advection(u, v)?;
    let (a, b) = analyze_pair(&grid, &adv.w[0], &adv.w[1], adv.n);
    SpectralField::from_coefficients(grid, a.into_iter().zip(b).map(|(x, y)| [x, y]).collect())
}

/// `B(u, v) = P[(u . grad) v]` on the retained modes. With the 2/3-rule grid
/// the truncation is exact (no aliasing) for band-limited inputs.
pub fn bilinear(u: &SpectralField, v: &SpectralField) -> Result<SpectralField> {
    let mut out = advection(u, v)?;
    out.leray_project_mut();
    Ok(out)
}

/// `b(u, v, w) = int ((u . grad) v) . w dx`, evaluated by quadrature on the
/// dealiased grid (exact for fields in the truncation).
pub fn trilinear_form(u: &SpectralField, v: &SpectralField, w: &SpectralField) -> Result<f64> {
    u.check_same_grid(w)?;
    let adv = physical_advection(u, v)?;
    let grid = w.grid();
    let n = adv.n;
    let (wx, wy) = synthesize_pair(grid, &w.component(0), &w.component(1), n);
    let mut acc = 0.0;
    for p in 0..n * n {
        acc += adv.w[0][p] * wx[p] + adv.w[1][p] * wy[p];
    }
    let h = grid.length() / n as f64;
    Ok(acc * h * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;
    use crate::testing::convolution_advection as convolution_oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn matches_convolution_on_small_lattice() {
        let g = SpectralGrid::new(2.0 * PI, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let u = SpectralField::random_solenoidal(g, &mut rng, 0.0);
        let v = SpectralField::random_solenoidal(g, &mut rng, 0.0);
        let fast = advection(&u, &v).unwrap();
        let slow = convolution_oracle(&u, &v);
        assert!(fast.difference(&slow).l2_norm() < 1e-14);
        let two_mode_u = SpectralField::solenoidal_mode(g, 1, 0, 1.0, 0.3).unwrap();
        let mut two_mode_v = SpectralField::solenoidal_mode(g, 0, 1, 0.7, 1.1).unwrap();
        two_mode_v.axpy(1.0, &SpectralField::solenoidal_mode(g, 1, 1, 0.4, -0.2).unwrap());
        let fast = bilinear(&two_mode_u, &two_mode_v).unwrap();
        let slow = convolution_oracle(&two_mode_u, &two_mode_v).leray_project();
        assert!(fast.difference(&slow).l2_norm() < 1e-14);
    }

    #[test]
    fn shear_flow_self_advection_vanishes() {
        let g = SpectralGrid::new(3.0, 6).unwrap();
        // u = (sin(2 pi y / L), 0)
        let u = SpectralField::solenoidal_mode(g, 0, 1, 1.0, PI / 2.0).unwrap();
        let b = bilinear(&u, &u).unwrap();
        assert!(b.l2_norm() < 1e-14);
    }

    #[test]
    fn bilinear_with_zero_argument() {
        let g = SpectralGrid::new(1.0, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = SpectralField::random_solenoidal(g, &mut rng, 1.0);
        let z = SpectralField::zeros(g);
        assert_eq!(bilinear(&z, &u).unwrap().l2_norm(), 0.0);
        assert_eq!(bilinear(&u, &z).unwrap().l2_norm(), 0.0);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let a = SpectralField::zeros(SpectralGrid::new(1.0, 4).unwrap());
        let b = SpectralField::zeros(SpectralGrid::new(1.0, 5).unwrap());
        assert!(bilinear(&a, &b).is_err());
        assert!(trilinear_form(&a, &a, &b).is_err());
    }

    #[test]
    fn trilinear_pairs_with_bilinear() {
        let g = SpectralGrid::new(2.0 * PI, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let u = SpectralField::random_solenoidal(g, &mut rng, 1.0);
        let v = SpectralField::random_solenoidal(g, &mut rng, 1.0);
        let w = SpectralField::random_solenoidal(g, &mut rng, 1.0);
        let t = trilinear_form(&u, &v, &w).unwrap();
        let pairing = bilinear(&u, &v).unwrap().inner(&w);
        assert!((t - pairing).abs() < 1e-12 * (1.0 + t.abs()));
        let anti = trilinear_form(&u, &w, &v).unwrap();
        assert!((t + anti).abs() < 1e-12 * (1.0 + t.abs()));
        let au = u.apply_stokes_power(1.0);
        let enstrophy = trilinear_form(&u, &u, &au).unwrap();
        assert!(enstrophy.abs() < 1e-10 * u.l2_norm() * u.l2_norm() * au.l2_norm());
    }
}
