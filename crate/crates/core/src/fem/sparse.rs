use std::io::Write;

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted, duplicate-free columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` entries; duplicates are summed in a
    /// fixed order.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = entries.to_vec();
        sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last = None;
        for &(r, c, v) in &sorted {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            indptr[r + 1] += indptr[r];
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Position of entry `(r, c)` in the value array.
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        row.binary_search(&c).ok().map(|p| self.indptr[r] + p)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.position(r, c).map_or(0.0, |p| self.values[p])
    }

    /// Row-wise iteration over `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |p| (r, self.indices[p], self.values[p]))
        })
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha A x`.
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                acc += self.values[p] * x[self.indices[p]];
            }
            y[r] += alpha * acc;
        }
    }

    /// `y += alpha A^T x`.
    pub fn mul_transpose_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        for r in 0..self.nrows {
            let xr = alpha * x[r];
            if xr == 0.0 {
                continue;
            }
            for p in self.indptr[r]..self.indptr[r + 1] {
                y[self.indices[p]] += self.values[p] * xr;
            }
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.nrows {
            let mut row = 0.0;
            for p in self.indptr[r]..self.indptr[r + 1] {
                row += self.values[p] * y[self.indices[p]];
            }
            acc += x[r] * row;
        }
        acc
    }

    /// `self + alpha other` for matrices with identical patterns.
    pub fn add_same_pattern(&self, alpha: f64, other: &Self) -> Result<Self> {
        if self.indptr != other.indptr || self.indices != other.indices {
            return Err(Error::GridMismatch("sparsity patterns differ".into()));
        }
        let mut out = self.clone();
        for (a, b) in out.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(out)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_residual(&self) -> f64 {
        self.antisymmetry(1.0)
    }

    /// Largest `|a_ij + a_ji|` relative to the largest entry.
    pub fn skew_residual(&self) -> f64 {
        self.antisymmetry(-1.0)
    }

    fn antisymmetry(&self, sign: f64) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let worst = self
            .entries()
            .map(|(r, c, v)| (v - sign * self.get(c, r)).abs())
            .fold(0.0f64, f64::max);
        worst / scale
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.entries() {
            d[r][c] = v;
        }
        d
    }

    pub(crate) fn push_triplets(&self, row_offset: usize, col_offset: usize, out: &mut Vec<Triplet<usize, usize, f64>>) {
        for (r, c, v) in self.entries() {
            out.push(Triplet::new(r + row_offset, c + col_offset, v));
        }
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut t = Vec::with_capacity(self.nnz());
        self.push_triplets(0, 0, &mut t);
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::LinearSolver(format!("{e:?}")))
    }

    /// Plain-text dump, one `row col value` line per stored entry (zero
    /// based, value in round-trip precision), preceded by a `%` header line
    /// with the dimensions and entry count.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.entries() {
            writeln!(w, "{r} {c} {v:e}")?;
        }
        Ok(())
    }

    pub fn read_triplets(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('%'))
            .ok_or_else(|| Error::Format("missing `%` header line".into()))?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad header `{header}`"))))
            .collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(Error::Format(format!("bad header `{header}`")));
        }
        let mut entries = Vec::with_capacity(dims[2]);
        for (i, line) in lines.enumerate() {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let parsed = (parts.len() == 3)
                .then(|| Some((parts[0].parse().ok()?, parts[1].parse().ok()?, parts[2].parse().ok()?)))
                .flatten();
            let (r, c, v): (usize, usize, f64) =
                parsed.ok_or_else(|| Error::Format(format!("bad entry on line {}", i + 2)))?;
            if r >= dims[0] || c >= dims[1] {
                return Err(Error::Format(format!("entry ({r}, {c}) out of bounds")));
            }
            entries.push((r, c, v));
        }
        Ok(Self::from_triplets(dims[0], dims[1], &entries))
    }
}
