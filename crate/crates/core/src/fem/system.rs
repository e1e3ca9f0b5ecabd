use std::sync::OnceLock;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use super::mesh::{PeriodicMesh, Triangle};
use super::quadrature::Quadrature;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::spectral::{eval_shifted_grid, SpectralField};

/// Values of the local bases at the points of a quadrature rule, for one
/// triangle kind. Weights include the triangle area.
#[derive(Debug, Clone)]
pub(crate) struct ElementTables {
    pub offsets: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub phi: Vec<[f64; 6]>,
    pub grad_phi: Vec<[[f64; 2]; 6]>,
    pub psi: Vec<[f64; 3]>,
    pub grad_lambda: [[f64; 2]; 3],
}

impl ElementTables {
    pub fn new(mesh: &PeriodicMesh, kind: usize, rule: &Quadrature) -> Self {
        let p = mesh.reference_vertices(kind);
        let j = [[p[1][0] - p[0][0], p[2][0] - p[0][0]], [p[1][1] - p[0][1], p[2][1] - p[0][1]]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let area = 0.5 * det.abs();
        let g1 = [j[1][1] / det, -j[0][1] / det];
        let g2 = [-j[1][0] / det, j[0][0] / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        let gl = [g0, g1, g2];
        let mut t = Self {
            offsets: Vec::new(),
            weights: Vec::new(),
            phi: Vec::new(),
            grad_phi: Vec::new(),
            psi: Vec::new(),
            grad_lambda: gl,
        };
        for (l, &w) in rule.points.iter().zip(&rule.weights) {
            t.offsets.push([
                l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
                l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
            ]);
            t.weights.push(w * area);
            t.phi.push(p2_values(l));
            t.grad_phi.push(p2_gradients(l, &gl));
            t.psi.push(*l);
        }
        t
    }
}

pub(crate) fn p2_values(l: &[f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[0] * l[2],
    ]
}

pub(crate) fn p2_gradients(l: &[f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let v = |i: usize| {
        let s = 4.0 * l[i] - 1.0;
        [s * g[i][0], s * g[i][1]]
    };
    let m = |i: usize, j: usize| {
        [
            4.0 * (l[i] * g[j][0] + l[j] * g[i][0]),
            4.0 * (l[i] * g[j][1] + l[j] * g[i][1]),
        ]
    };
    [v(0), v(1), v(2), m(0, 1), m(1, 2), m(0, 2)]
}

/// Taylor-Hood velocity: nodal values of both components, `[U_x; U_y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FemField {
    pub values: Vec<f64>,
}

impl FemField {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            values: vec![0.0; 2 * nodes],
        }
    }

    pub fn nodes(&self) -> usize {
        self.values.len() / 2
    }

    pub fn component(&self, c: usize) -> &[f64] {
        let n = self.nodes();
        &self.values[c * n..(c + 1) * n]
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }
}

/// Continuous piecewise-linear pressure, one value per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FemPressure {
    pub values: Vec<f64>,
}

/// Sparse LU factorization with its reusable symbolic analysis.
pub(crate) struct SparseLu {
    pub lu: Lu<usize, f64>,
    pub symbolic: SymbolicLu<usize>,
    pub dim: usize,
}

impl SparseLu {
    pub fn factor(a: &SparseColMat<usize, f64>) -> Result<Self> {
        let symbolic = SymbolicLu::try_new(a.symbolic()).map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
        Self::factor_with(a, symbolic)
    }

    pub fn factor_with(a: &SparseColMat<usize, f64>, symbolic: SymbolicLu<usize>) -> Result<Self> {
        let lu = Lu::try_new_with_symbolic(symbolic.clone(), a.as_ref())
            .map_err(|e| Error::LinearSolver(format!("{e:?}")))?;
        Ok(Self {
            lu,
            symbolic,
            dim: a.nrows(),
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.dim);
        let mut b = Mat::<f64>::from_fn(self.dim, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        (0..self.dim).map(|i| b[(i, 0)]).collect()
    }

    pub fn solve_many(&self, rhs: &mut Mat<f64>) {
        self.lu.solve_in_place(rhs.as_mut());
    }
}

/// Solver for the bordered saddle system (see [`FemSystem::saddle_apply`]).
///
/// Only a sparse matrix is factorized: the pressure value at vertex 0 is
/// pinned (its divergence row is implied by the others because the columns
/// of the divergence matrix sum to zero), the pressure mean is restored by a
/// constant shift, and the two velocity-mean constraints are eliminated
/// through a 2x2 capacitance system. Dense border rows would otherwise
/// destroy the sparsity of the factors.
pub(crate) struct StokesSolver {
    lu: SparseLu,
    /// `S^{-1} E` for the two velocity-mean border columns `E`.
    z: [Vec<f64>; 2],
    capacitance_inv: [[f64; 2]; 2],
}

impl StokesSolver {
    pub fn symbolic(&self) -> SymbolicLu<usize> {
        self.lu.symbolic.clone()
    }

    /// Solves the bordered system; `rhs` and the result use the layout
    /// `[U_x, U_y, P, mu_x, mu_y, mu_p]`.
    pub fn solve(&self, sys: &FemSystem, rhs: &[f64]) -> Vec<f64> {
        let nn = sys.nodes();
        let np = sys.pressure_dofs();
        let pr = 2 * nn;
        let mu = pr + np;
        let m = sys.pressure_mean();
        let m_total: f64 = m.iter().sum();
        // the pressure-mean multiplier absorbs the inconsistent part of the
        // divergence rows
        let mu_p = rhs[pr..mu].iter().sum::<f64>() / m_total;
        let mut s = Vec::with_capacity(self.lu.dim);
        s.extend_from_slice(&rhs[..pr]);
        s.extend((1..np).map(|p| rhs[pr + p] - m[p] * mu_p));
        let y = self.lu.solve(&s);
        let c = sys.velocity_mean();
        let ety = [
            (0..nn).map(|j| c[j] * y[j]).sum::<f64>() - rhs[mu],
            (0..nn).map(|j| c[j] * y[nn + j]).sum::<f64>() - rhs[mu + 1],
        ];
        let ci = &self.capacitance_inv;
        let mus = [
            ci[0][0] * ety[0] + ci[0][1] * ety[1],
            ci[1][0] * ety[0] + ci[1][1] * ety[1],
        ];
        let mut x = vec![0.0; sys.saddle_dim()];
        for i in 0..pr {
            x[i] = y[i] - self.z[0][i] * mus[0] - self.z[1][i] * mus[1];
        }
        for p in 1..np {
            let i = pr + p - 1;
            x[pr + p] = y[i] - self.z[0][i] * mus[0] - self.z[1][i] * mus[1];
        }
        let shift = (rhs[mu + 2] - (0..np).map(|p| m[p] * x[pr + p]).sum::<f64>()) / m_total;
        for v in &mut x[pr..mu] {
            *v += shift;
        }
        x[mu] = mus[0];
        x[mu + 1] = mus[1];
        x[mu + 2] = mu_p;
        x
    }
}

/// Assembled Taylor-Hood (P2 velocity, P1 pressure) operators on a periodic
/// mesh. Scalar blocks act on each velocity component.
pub struct FemSystem {
    mesh: PeriodicMesh,
    triangles: Vec<Triangle>,
    tables: [ElementTables; 2],
    mass: CsrMatrix,
    stiffness: CsrMatrix,
    /// `(psi_p, d phi_j / dx_c)` for `c = 0, 1`.
    divergence: [CsrMatrix; 2],
    pressure_mass: CsrMatrix,
    pressure_stiffness: CsrMatrix,
    velocity_mean: Vec<f64>,
    pressure_mean: Vec<f64>,
    scatter: Vec<usize>,
    projector: OnceLock<StokesSolver>,
    pressure_projector: OnceLock<SparseLu>,
}

impl std::fmt::Debug for FemSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FemSystem")
            .field("mesh", &self.mesh)
            .field("velocity_dofs", &(2 * self.mesh.node_count()))
            .field("pressure_dofs", &self.mesh.vertex_count())
            .finish()
    }
}

impl FemSystem {
    pub fn new(mesh: PeriodicMesh) -> Self {
        let rule = Quadrature::degree5();
        let tables = [ElementTables::new(&mesh, 0, &rule), ElementTables::new(&mesh, 1, &rule)];
        let triangles = mesh.triangles();
        let nn = mesh.node_count();
        let nv = mesh.vertex_count();

        let mut pattern = Vec::with_capacity(36 * triangles.len());
        for t in &triangles {
            for &a in &t.nodes {
                for &b in &t.nodes {
                    pattern.push((a, b, 0.0));
                }
            }
        }
        let pattern = CsrMatrix::from_triplets(nn, nn, &pattern);
        let mut scatter = Vec::with_capacity(36 * triangles.len());
        for t in &triangles {
            for &a in &t.nodes {
                for &b in &t.nodes {
                    scatter.push(pattern.position(a, b).expect("pattern covers element pairs"));
                }
            }
        }

        let mut mass = pattern.clone();
        let mut stiffness = pattern.clone();
        let mut div_entries = [Vec::new(), Vec::new()];
        let mut pm_entries = Vec::new();
        let mut pk_entries = Vec::new();
        let mut velocity_mean = vec![0.0; nn];
        let mut pressure_mean = vec![0.0; nv];
        for (ti, t) in triangles.iter().enumerate() {
            let tab = &tables[t.kind];
            for q in 0..tab.weights.len() {
                let w = tab.weights[q];
                let phi = &tab.phi[q];
                let gphi = &tab.grad_phi[q];
                let psi = &tab.psi[q];
                for a in 0..6 {
                    velocity_mean[t.nodes[a]] += w * phi[a];
                    for b in 0..6 {
                        let pos = scatter[36 * ti + 6 * a + b];
                        mass.values_mut()[pos] += w * phi[a] * phi[b];
                        stiffness.values_mut()[pos] +=
                            w * (gphi[a][0] * gphi[b][0] + gphi[a][1] * gphi[b][1]);
                    }
                }
                for p in 0..3 {
                    pressure_mean[t.vertices[p]] += w * psi[p];
                    for r in 0..3 {
                        pm_entries.push((t.vertices[p], t.vertices[r], w * psi[p] * psi[r]));
                    }
                    for b in 0..6 {
                        for (c, entries) in div_entries.iter_mut().enumerate() {
                            entries.push((t.vertices[p], t.nodes[b], w * psi[p] * gphi[b][c]));
                        }
                    }
                }
            }
            let area: f64 = tab.weights.iter().sum();
            for p in 0..3 {
                for r in 0..3 {
                    let g = tab.grad_lambda;
                    pk_entries.push((
                        t.vertices[p],
                        t.vertices[r],
                        area * (g[p][0] * g[r][0] + g[p][1] * g[r][1]),
                    ));
                }
            }
        }
        let [dx, dy] = div_entries;
        Self {
            mesh,
            triangles,
            tables,
            mass,
            stiffness,
            divergence: [
                CsrMatrix::from_triplets(nv, nn, &dx),
                CsrMatrix::from_triplets(nv, nn, &dy),
            ],
            pressure_mass: CsrMatrix::from_triplets(nv, nv, &pm_entries),
            pressure_stiffness: CsrMatrix::from_triplets(nv, nv, &pk_entries),
            velocity_mean,
            pressure_mean,
            scatter,
            projector: OnceLock::new(),
            pressure_projector: OnceLock::new(),
        }
    }

    pub fn mesh(&self) -> &PeriodicMesh {
        &self.mesh
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// Nodes per velocity component.
    pub fn nodes(&self) -> usize {
        self.mesh.node_count()
    }

    pub fn pressure_dofs(&self) -> usize {
        self.mesh.vertex_count()
    }

    /// Scalar P2 mass matrix.
    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    /// Scalar P2 stiffness matrix `(grad phi_i, grad phi_j)`.
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// `(psi_p, d phi_j / dx_c)`: rows pressure, columns component `c` nodes.
    pub fn divergence(&self, c: usize) -> &CsrMatrix {
        &self.divergence[c]
    }

    pub fn pressure_mass(&self) -> &CsrMatrix {
        &self.pressure_mass
    }

    pub fn pressure_stiffness(&self) -> &CsrMatrix {
        &self.pressure_stiffness
    }

    /// `int phi_j`, the velocity mean functional per component.
    pub fn velocity_mean(&self) -> &[f64] {
        &self.velocity_mean
    }

    pub fn pressure_mean(&self) -> &[f64] {
        &self.pressure_mean
    }

    /// Scalar matrix on the P2 pattern from per-triangle local blocks.
    pub(crate) fn assemble_scalar(&self, mut local: impl FnMut(&Triangle) -> [[f64; 6]; 6]) -> CsrMatrix {
        let mut m = self.mass.clone();
        m.values_mut().iter_mut().for_each(|v| *v = 0.0);
        for (ti, t) in self.triangles.iter().enumerate() {
            let block = local(t);
            for a in 0..6 {
                for b in 0..6 {
                    m.values_mut()[self.scatter[36 * ti + 6 * a + b]] += block[a][b];
                }
            }
        }
        m
    }

    /// Matrix of the skew-symmetrized convection form
    /// `((w . grad) phi_j, phi_i) + 1/2 ((div w) phi_j, phi_i)`.
    pub fn convection_matrix(&self, w: &FemField) -> CsrMatrix {
        let wx = w.component(0);
        let wy = w.component(1);
        self.assemble_scalar(|t| {
            let tab = &self.tables[t.kind];
            let mut block = [[0.0; 6]; 6];
            for q in 0..tab.weights.len() {
                let phi = &tab.phi[q];
                let g = &tab.grad_phi[q];
                let mut wq = [0.0; 2];
                let mut div = 0.0;
                for a in 0..6 {
                    let (u, v) = (wx[t.nodes[a]], wy[t.nodes[a]]);
                    wq[0] += u * phi[a];
                    wq[1] += v * phi[a];
                    div += u * g[a][0] + v * g[a][1];
                }
                let wt = tab.weights[q];
                for j in 0..6 {
                    let adv = wq[0] * g[j][0] + wq[1] * g[j][1] + 0.5 * div * phi[j];
                    for i in 0..6 {
                        block[i][j] += wt * adv * phi[i];
                    }
                }
            }
            block
        })
    }

    /// Unknown layout of the saddle systems: velocity, pressure, then the
    /// multipliers for the two velocity means and the pressure mean.
    pub fn saddle_dim(&self) -> usize {
        2 * self.nodes() + self.pressure_dofs() + 3
    }

    /// Sparse part of the saddle matrix, `[V 0 Dx^T; 0 V Dy^T; Dx Dy 0]`
    /// with the row and column of pressure vertex 0 removed.
    fn pinned_saddle_matrix(&self, velocity_block: &CsrMatrix) -> Result<SparseColMat<usize, f64>> {
        let nn = self.nodes();
        let np = self.pressure_dofs();
        let pr = 2 * nn;
        let mut t: Vec<Triplet<usize, usize, f64>> = Vec::new();
        velocity_block.push_triplets(0, 0, &mut t);
        velocity_block.push_triplets(nn, nn, &mut t);
        for c in 0..2 {
            for (p, j, v) in self.divergence[c].entries() {
                if p > 0 {
                    t.push(Triplet::new(pr + p - 1, c * nn + j, v));
                    t.push(Triplet::new(c * nn + j, pr + p - 1, v));
                }
            }
        }
        let dim = pr + np - 1;
        SparseColMat::try_new_from_triplets(dim, dim, &t).map_err(|e| Error::LinearSolver(format!("{e:?}")))
    }

    /// Factorizes the bordered saddle system with velocity block `V`,
    /// optionally reusing a symbolic analysis of the same pattern.
    pub(crate) fn stokes_solver(
        &self,
        velocity_block: &CsrMatrix,
        symbolic: Option<SymbolicLu<usize>>,
    ) -> Result<StokesSolver> {
        let a = self.pinned_saddle_matrix(velocity_block)?;
        let lu = match symbolic {
            Some(sym) => SparseLu::factor_with(&a, sym)?,
            None => SparseLu::factor(&a)?,
        };
        let nn = self.nodes();
        let c = &self.velocity_mean;
        let mut z = [vec![0.0; lu.dim], vec![0.0; lu.dim]];
        for (comp, zc) in z.iter_mut().enumerate() {
            let mut e = vec![0.0; lu.dim];
            e[comp * nn..(comp + 1) * nn].copy_from_slice(c);
            *zc = lu.solve(&e);
        }
        let mut cap = [[0.0; 2]; 2];
        for (r, row) in cap.iter_mut().enumerate() {
            for (col, v) in row.iter_mut().enumerate() {
                *v = (0..nn).map(|j| c[j] * z[col][r * nn + j]).sum();
            }
        }
        let det = cap[0][0] * cap[1][1] - cap[0][1] * cap[1][0];
        if !(det.is_finite() && det.abs() > 0.0) {
            return Err(Error::LinearSolver("singular velocity-mean capacitance matrix".into()));
        }
        let capacitance_inv = [
            [cap[1][1] / det, -cap[0][1] / det],
            [-cap[1][0] / det, cap[0][0] / det],
        ];
        Ok(StokesSolver {
            lu,
            z,
            capacitance_inv,
        })
    }

    /// `y = S x` for the saddle matrix with velocity block `V`.
    pub(crate) fn saddle_apply(&self, velocity_block: &CsrMatrix, x: &[f64]) -> Vec<f64> {
        let nn = self.nodes();
        let np = self.pressure_dofs();
        let pr = 2 * nn;
        let mu = pr + np;
        let mut y = vec![0.0; x.len()];
        for c in 0..2 {
            let (u, rest) = (&x[c * nn..(c + 1) * nn], &x[pr..mu]);
            velocity_block.mul_vec_add(1.0, u, &mut y[c * nn..(c + 1) * nn]);
            self.divergence[c].mul_transpose_add(1.0, rest, &mut y[c * nn..(c + 1) * nn]);
            let mut d = vec![0.0; np];
            self.divergence[c].mul_vec_add(1.0, u, &mut d);
            for (a, b) in y[pr..mu].iter_mut().zip(&d) {
                *a += b;
            }
            let m = x[mu + c];
            let mut acc = 0.0;
            for j in 0..nn {
                y[c * nn + j] += self.velocity_mean[j] * m;
                acc += self.velocity_mean[j] * u[j];
            }
            y[mu + c] = acc;
        }
        let mut acc = 0.0;
        for p in 0..np {
            y[pr + p] += self.pressure_mean[p] * x[mu + 2];
            acc += self.pressure_mean[p] * x[pr + p];
        }
        y[mu + 2] = acc;
        y
    }

    /// `|U|^2` in `L^2`.
    pub fn l2_norm_sq(&self, u: &FemField) -> f64 {
        (0..2).map(|c| self.mass.bilinear(u.component(c), u.component(c))).sum()
    }

    /// `|grad U|^2`, the discrete V seminorm.
    pub fn h1_seminorm_sq(&self, u: &FemField) -> f64 {
        (0..2)
            .map(|c| self.stiffness.bilinear(u.component(c), u.component(c)))
            .sum()
    }

    pub fn inner(&self, u: &FemField, v: &FemField) -> f64 {
        (0..2).map(|c| self.mass.bilinear(u.component(c), v.component(c))).sum()
    }

    /// `(div U, psi_p)` for every pressure basis function.
    pub fn discrete_divergence(&self, u: &FemField) -> Vec<f64> {
        let mut d = vec![0.0; self.pressure_dofs()];
        for c in 0..2 {
            self.divergence[c].mul_vec_add(1.0, u.component(c), &mut d);
        }
        d
    }

    /// Largest `|(div U, psi_p)|` relative to `|grad U| max_p |psi_p|_{L^2}`.
    pub fn divergence_residual(&self, u: &FemField) -> f64 {
        let d = self.discrete_divergence(u);
        let worst = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let psi = self.pressure_mass.get(0, 0).sqrt();
        let scale = self.h1_seminorm_sq(u).sqrt() * psi;
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn pressure_l2_norm_sq(&self, p: &FemPressure) -> f64 {
        self.pressure_mass.bilinear(&p.values, &p.values)
    }

    pub fn pressure_gradient_norm_sq(&self, p: &FemPressure) -> f64 {
        self.pressure_stiffness.bilinear(&p.values, &p.values)
    }

    /// Nodal interpolant of a spectral field (exact point values).
    pub fn interp_from_spectral(&self, f: &SpectralField) -> Result<FemField> {
        self.check_length(f)?;
        let [x, y] = eval_shifted_grid(f, self.mesh.node_side(), [0.0, 0.0]);
        let mut values = x;
        values.extend(y);
        Ok(FemField { values })
    }

    /// Nodal interpolant of a closure.
    pub fn interp_fn(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> FemField {
        let nn = self.nodes();
        let mut values = vec![0.0; 2 * nn];
        for i in 0..nn {
            let v = f(self.mesh.node_position(i));
            values[i] = v[0];
            values[nn + i] = v[1];
        }
        FemField { values }
    }

    fn check_length(&self, f: &SpectralField) -> Result<()> {
        if f.grid().length() != self.mesh.length() {
            return Err(Error::GridMismatch(format!(
                "spectral domain length {} vs mesh length {}",
                f.grid().length(),
                self.mesh.length()
            )));
        }
        Ok(())
    }

    /// Load vector `(f, phi_i e_c)` of a spectral field, by the degree-5 rule.
    pub fn load_spectral(&self, f: &SpectralField) -> Result<Vec<f64>> {
        self.check_length(f)?;
        let n = self.mesh.subdivisions();
        let nn = self.nodes();
        let mut b = vec![0.0; 2 * nn];
        for kind in 0..2 {
            let tab = &self.tables[kind];
            for q in 0..tab.weights.len() {
                let vals = eval_shifted_grid(f, n, tab.offsets[q]);
                for t in self.triangles.iter().filter(|t| t.kind == kind) {
                    let cell = t.cell.0 * n + t.cell.1;
                    let w = tab.weights[q];
                    for a in 0..6 {
                        let s = w * tab.phi[q][a];
                        b[t.nodes[a]] += s * vals[0][cell];
                        b[nn + t.nodes[a]] += s * vals[1][cell];
                    }
                }
            }
        }
        Ok(b)
    }

    /// Load vector of a closure with an arbitrary rule.
    pub fn load_fn(&self, f: impl Fn([f64; 2]) -> [f64; 2], rule: &Quadrature) -> Vec<f64> {
        let nn = self.nodes();
        let mut b = vec![0.0; 2 * nn];
        let tabs = [ElementTables::new(&self.mesh, 0, rule), ElementTables::new(&self.mesh, 1, rule)];
        let c = self.mesh.cell_size();
        for t in &self.triangles {
            let tab = &tabs[t.kind];
            let origin = [t.cell.0 as f64 * c, t.cell.1 as f64 * c];
            for q in 0..tab.weights.len() {
                let v = f([origin[0] + tab.offsets[q][0], origin[1] + tab.offsets[q][1]]);
                for a in 0..6 {
                    let s = tab.weights[q] * tab.phi[q][a];
                    b[t.nodes[a]] += s * v[0];
                    b[nn + t.nodes[a]] += s * v[1];
                }
            }
        }
        b
    }

    /// `(|U - f|^2, |grad (U - f)|^2)` by quadrature with `rule`.
    pub fn velocity_errors(
        &self,
        u: &FemField,
        f: impl Fn([f64; 2]) -> [f64; 2],
        grad_f: impl Fn([f64; 2]) -> [[f64; 2]; 2],
        rule: &Quadrature,
    ) -> (f64, f64) {
        let tabs = [ElementTables::new(&self.mesh, 0, rule), ElementTables::new(&self.mesh, 1, rule)];
        let c = self.mesh.cell_size();
        let (mut l2, mut h1) = (0.0, 0.0);
        for t in &self.triangles {
            let tab = &tabs[t.kind];
            let origin = [t.cell.0 as f64 * c, t.cell.1 as f64 * c];
            for q in 0..tab.weights.len() {
                let x = [origin[0] + tab.offsets[q][0], origin[1] + tab.offsets[q][1]];
                let (fv, fg) = (f(x), grad_f(x));
                for comp in 0..2 {
                    let uc = u.component(comp);
                    let mut val = 0.0;
                    let mut grad = [0.0; 2];
                    for a in 0..6 {
                        let coef = uc[t.nodes[a]];
                        val += coef * tab.phi[q][a];
                        grad[0] += coef * tab.grad_phi[q][a][0];
                        grad[1] += coef * tab.grad_phi[q][a][1];
                    }
                    let w = tab.weights[q];
                    l2 += w * (val - fv[comp]).powi(2);
                    h1 += w * ((grad[0] - fg[comp][0]).powi(2) + (grad[1] - fg[comp][1]).powi(2));
                }
            }
        }
        (l2, h1)
    }

    /// `|P - f|^2` for a pressure by quadrature with `rule`.
    pub fn pressure_error(&self, p: &FemPressure, f: impl Fn([f64; 2]) -> f64, rule: &Quadrature) -> f64 {
        let tabs = [ElementTables::new(&self.mesh, 0, rule), ElementTables::new(&self.mesh, 1, rule)];
        let c = self.mesh.cell_size();
        let mut acc = 0.0;
        for t in &self.triangles {
            let tab = &tabs[t.kind];
            let origin = [t.cell.0 as f64 * c, t.cell.1 as f64 * c];
            for q in 0..tab.weights.len() {
                let x = [origin[0] + tab.offsets[q][0], origin[1] + tab.offsets[q][1]];
                let ph: f64 = (0..3).map(|i| p.values[t.vertices[i]] * tab.psi[q][i]).sum();
                acc += tab.weights[q] * (ph - f(x)).powi(2);
            }
        }
        acc
    }

    fn projector(&self) -> Result<&StokesSolver> {
        if let Some(s) = self.projector.get() {
            return Ok(s);
        }
        let s = self.stokes_solver(&self.mass, None)?;
        Ok(self.projector.get_or_init(|| s))
    }

    /// `L^2` projection onto discretely divergence-free, mean-zero fields,
    /// given the load vector `(z, phi_i e_c)`.
    pub fn project_load(&self, load: &[f64]) -> Result<FemField> {
        let nn = self.nodes();
        if load.len() != 2 * nn {
            return Err(Error::GridMismatch(format!(
                "load vector has {} entries, expected {}",
                load.len(),
                2 * nn
            )));
        }
        let mut rhs = vec![0.0; self.saddle_dim()];
        rhs[..2 * nn].copy_from_slice(load);
        let x = self.projector()?.solve(self, &rhs);
        let out = FemField {
            values: x[..2 * nn].to_vec(),
        };
        if out.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolver("projection produced non-finite values".into()));
        }
        Ok(out)
    }

    /// Projection `Q_h^0` of a finite-element velocity.
    pub fn project_qh0(&self, z: &FemField) -> Result<FemField> {
        let nn = self.nodes();
        let mut load = vec![0.0; 2 * nn];
        for c in 0..2 {
            self.mass.mul_vec_add(1.0, z.component(c), &mut load[c * nn..(c + 1) * nn]);
        }
        self.project_load(&load)
    }

    /// Projection `Q_h^0` of a spectral field, paired by quadrature.
    pub fn project_spectral(&self, f: &SpectralField) -> Result<FemField> {
        self.project_load(&self.load_spectral(f)?)
    }

    /// `L^2` projection of a scalar onto mean-zero piecewise-linear functions.
    pub fn project_pressure_fn(&self, f: impl Fn([f64; 2]) -> f64, rule: &Quadrature) -> Result<FemPressure> {
        let np = self.pressure_dofs();
        let tabs = [ElementTables::new(&self.mesh, 0, rule), ElementTables::new(&self.mesh, 1, rule)];
        let c = self.mesh.cell_size();
        let mut rhs = vec![0.0; np];
        for t in &self.triangles {
            let tab = &tabs[t.kind];
            let origin = [t.cell.0 as f64 * c, t.cell.1 as f64 * c];
            for q in 0..tab.weights.len() {
                let v = f([origin[0] + tab.offsets[q][0], origin[1] + tab.offsets[q][1]]);
                for i in 0..3 {
                    rhs[t.vertices[i]] += tab.weights[q] * tab.psi[q][i] * v;
                }
            }
        }
        let solver = match self.pressure_projector.get() {
            Some(s) => s,
            None => {
                let s = SparseLu::factor(&self.pressure_mass.to_faer()?)?;
                self.pressure_projector.get_or_init(|| s)
            }
        };
        // M_p 1 is the mean functional, so the constrained projection is the
        // unconstrained one minus its mean
        let mut x = solver.solve(&rhs);
        let mean = x.iter().zip(&self.pressure_mean).map(|(a, b)| a * b).sum::<f64>()
            / self.pressure_mean.iter().sum::<f64>();
        x.iter_mut().for_each(|v| *v -= mean);
        Ok(FemPressure {
            values: x,
        })
    }
}
