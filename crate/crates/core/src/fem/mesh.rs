use crate::error::{Error, Result};

/// Uniform periodic triangulation of `[0, L]^2`: an `n x n` grid of squares,
/// each split along the diagonal from `(i, j)` to `(i + 1, j + 1)`.
///
/// Quadratic-element nodes form the `2n x 2n` grid `(a, b) L / (2n)`
/// (index `a * 2n + b`); vertices are the even nodes, numbered `i * n + j`
/// for pressure unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicMesh {
    length: f64,
    n: usize,
}

/// A mesh triangle. `kind` 0 is the lower triangle of its square,
/// vertices `(i, j), (i+1, j), (i+1, j+1)`; kind 1 the upper one,
/// `(i, j), (i+1, j+1), (i, j+1)`. Local node order is
/// `[v0, v1, v2, m01, m12, m02]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub cell: (usize, usize),
    pub kind: usize,
    pub nodes: [usize; 6],
    pub vertices: [usize; 3],
}

impl PeriodicMesh {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "mesh needs at least 2 subdivisions, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "domain length must be positive, got {length}"
            )));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn subdivisions(&self) -> usize {
        self.n
    }

    /// Side of the grid squares.
    pub fn cell_size(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Triangle diameter `L sqrt(2) / n`.
    pub fn h(&self) -> f64 {
        self.length * std::f64::consts::SQRT_2 / self.n as f64
    }

    pub fn vertex_count(&self) -> usize {
        self.n * self.n
    }

    pub fn edge_count(&self) -> usize {
        3 * self.n * self.n
    }

    pub fn triangle_count(&self) -> usize {
        2 * self.n * self.n
    }

    /// Nodes per axis of the quadratic node grid.
    pub fn node_side(&self) -> usize {
        2 * self.n
    }

    pub fn node_count(&self) -> usize {
        4 * self.n * self.n
    }

    pub fn node_position(&self, node: usize) -> [f64; 2] {
        let s = self.node_side();
        let d = self.length / s as f64;
        [(node / s) as f64 * d, (node % s) as f64 * d]
    }

    pub fn vertex_position(&self, v: usize) -> [f64; 2] {
        let c = self.cell_size();
        [(v / self.n) as f64 * c, (v % self.n) as f64 * c]
    }

    /// Vertex offsets of each triangle kind relative to its cell corner.
    pub fn reference_vertices(&self, kind: usize) -> [[f64; 2]; 3] {
        let c = self.cell_size();
        if kind == 0 {
            [[0.0, 0.0], [c, 0.0], [c, c]]
        } else {
            [[0.0, 0.0], [c, c], [0.0, c]]
        }
    }

    /// Triangles ordered by cell `(i, j)` (row major), lower before upper.
    pub fn triangles(&self) -> Vec<Triangle> {
        let n = self.n;
        let s = self.node_side();
        let node = |a: usize, b: usize| (a % s) * s + (b % s);
        let vert = |i: usize, j: usize| (i % n) * n + (j % n);
        let mut out = Vec::with_capacity(self.triangle_count());
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (2 * i, 2 * j);
                out.push(Triangle {
                    cell: (i, j),
                    kind: 0,
                    nodes: [
                        node(a, b),
                        node(a + 2, b),
                        node(a + 2, b + 2),
                        node(a + 1, b),
                        node(a + 2, b + 1),
                        node(a + 1, b + 1),
                    ],
                    vertices: [vert(i, j), vert(i + 1, j), vert(i + 1, j + 1)],
                });
                out.push(Triangle {
                    cell: (i, j),
                    kind: 1,
                    nodes: [
                        node(a, b),
                        node(a + 2, b + 2),
                        node(a, b + 2),
                        node(a + 1, b + 1),
                        node(a + 1, b + 2),
                        node(a, b + 1),
                    ],
                    vertices: [vert(i, j), vert(i + 1, j + 1), vert(i, j + 1)],
                });
            }
        }
        out
    }
}
