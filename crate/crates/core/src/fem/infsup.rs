//! Discrete inf-sup constant of the velocity/pressure pair.

use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use super::system::{FemField, FemPressure, FemSystem, SparseLu};
use crate::error::{Error, Result};

/// Eigenvalues `mu` of `A x = mu B x` (`A` symmetric, `B` symmetric positive
/// definite) in ascending order, with `B`-orthonormal eigenvectors as columns.
pub(crate) fn generalized_eigen(a: &Mat<f64>, b: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let n = a.nrows();
    let llt = b
        .llt(Side::Lower)
        .map_err(|e| Error::LinearSolver(format!("mass matrix is not positive definite: {e:?}")))?;
    let l = llt.L().to_owned();
    // C = L^{-1} A L^{-T}
    let mut y = a.clone();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), y.as_mut(), faer::Par::Seq);
    let mut c = y.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), c.as_mut(), faer::Par::Seq);
    let c = Mat::from_fn(n, n, |i, j| 0.5 * (c[(i, j)] + c[(j, i)]));
    let eig = c
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::LinearSolver(format!("eigensolver failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let values: Vec<f64> = (0..n).map(|i| s[i]).collect();
    let mut vecs = eig.U().to_owned();
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), vecs.as_mut(), faer::Par::Seq);
    Ok((values, vecs))
}

/// Result of the inf-sup eigenvalue computation.
#[derive(Debug, Clone)]
pub struct InfSup {
    /// `beta_h = inf_q sup_v (div v, q) / (|grad v| |q|)` over mean-zero `q`.
    pub beta: f64,
    /// Eigenvalues of the pressure Schur complement relative to the pressure
    /// mass, ascending, including the constant mode.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues treated as zero (only the constants for a stable
    /// pair).
    pub zero_modes: usize,
    /// Pressure attaining the infimum.
    pub pressure: FemPressure,
}

/// Computes the inf-sup constant from the generalized eigenproblem
/// `B K^{-1} B^T q = beta^2 M_p q`. Dense in the pressure space, so intended
/// for moderate meshes.
pub fn infsup_analysis(system: &FemSystem) -> Result<InfSup> {
    let nn = system.nodes();
    let np = system.pressure_dofs();
    let solver = pinned_stiffness(system)?;
    let mut schur = Mat::<f64>::zeros(np, np);
    for c in 0..2 {
        let b = system.divergence(c);
        let mut rhs = Mat::<f64>::zeros(nn, np);
        for (p, j, v) in b.entries() {
            rhs[(j, p)] += v;
        }
        solver.solve_many(&mut rhs);
        for (p, j, v) in b.entries() {
            for q in 0..np {
                schur[(p, q)] += v * rhs[(j, q)];
            }
        }
    }
    let mass = dense(system.pressure_mass());
    let (values, vecs) = generalized_eigen(&schur, &mass)?;
    let top = values.last().copied().unwrap_or(0.0).abs().max(f64::MIN_POSITIVE);
    let zero_modes = values.iter().filter(|v| v.abs() <= 1e-10 * top).count();
    let first = values
        .iter()
        .position(|v| v.abs() > 1e-10 * top)
        .ok_or_else(|| Error::LinearSolver("pressure Schur complement vanishes".into()))?;
    let beta = values[first].max(0.0).sqrt();
    let pressure = FemPressure {
        values: (0..np).map(|i| vecs[(i, first)]).collect(),
    };
    Ok(InfSup {
        beta,
        eigenvalues: values,
        zero_modes,
        pressure,
    })
}

/// Velocity `v = K^{-1} B^T q` realizing the supremum for pressure `q`.
pub fn supremizer(system: &FemSystem, q: &FemPressure) -> Result<FemField> {
    let nn = system.nodes();
    let solver = pinned_stiffness(system)?;
    let mut values = Vec::with_capacity(2 * nn);
    for c in 0..2 {
        let mut rhs = Mat::<f64>::zeros(nn, 1);
        let mut col = vec![0.0; nn];
        system.divergence(c).mul_transpose_add(1.0, &q.values, &mut col);
        for (j, v) in col.iter().enumerate() {
            rhs[(j, 0)] = *v;
        }
        solver.solve_many(&mut rhs);
        values.extend((0..nn).map(|j| rhs[(j, 0)]));
    }
    Ok(FemField { values })
}

/// Ratio `(div v, q) / (|grad v| |q|)`.
pub fn infsup_ratio(system: &FemSystem, v: &FemField, q: &FemPressure) -> f64 {
    let d = system.discrete_divergence(v);
    let num: f64 = d.iter().zip(&q.values).map(|(a, b)| a * b).sum();
    num / (system.h1_seminorm_sq(v).sqrt() * system.pressure_l2_norm_sq(q).sqrt())
}

/// Mean-zero solutions of `K x = b` for right-hand sides with zero sum
/// (every divergence column qualifies). Node 0 is pinned and the result
/// shifted to zero mean.
struct PinnedStiffness<'a> {
    lu: SparseLu,
    mean: &'a [f64],
}

impl PinnedStiffness<'_> {
    fn solve_many(&self, rhs: &mut Mat<f64>) {
        let n = self.mean.len();
        let mut inner = Mat::<f64>::from_fn(n - 1, rhs.ncols(), |i, j| rhs[(i + 1, j)]);
        self.lu.solve_many(&mut inner);
        let total: f64 = self.mean.iter().sum();
        for j in 0..rhs.ncols() {
            let shift = (1..n).map(|i| self.mean[i] * inner[(i - 1, j)]).sum::<f64>() / total;
            rhs[(0, j)] = -shift;
            for i in 1..n {
                rhs[(i, j)] = inner[(i - 1, j)] - shift;
            }
        }
    }
}

fn pinned_stiffness(system: &FemSystem) -> Result<PinnedStiffness<'_>> {
    let nn = system.nodes();
    let mut t: Vec<Triplet<usize, usize, f64>> = Vec::new();
    for (r, c, v) in system.stiffness().entries() {
        if r > 0 && c > 0 {
            t.push(Triplet::new(r - 1, c - 1, v));
        }
    }
    let a = SparseColMat::try_new_from_triplets(nn - 1, nn - 1, &t)
        .map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
    Ok(PinnedStiffness {
        lu: SparseLu::factor(&a)?,
        mean: system.velocity_mean(),
    })
}

pub(crate) fn dense(m: &super::sparse::CsrMatrix) -> Mat<f64> {
    let mut out = Mat::<f64>::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.entries() {
        out[(r, c)] += v;
    }
    out
}
