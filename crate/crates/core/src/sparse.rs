//! Sparse symmetric matrices, sparse row matrices, and an envelope
//! (profile) Cholesky factorization.
//!
//! The precision matrices in this crate come from structured meshes, so
//! their natural node ordering is already narrow-banded and the factor
//! fills only inside the row envelope. Dense trailing rows (fixed
//! effects) also fit this scheme.

use crate::error::{Error, Result};
use std::io::Write;

/// Symmetric sparse matrix in CSC layout with the full (both triangles)
/// pattern stored. Row indices are sorted within each column.
#[derive(Debug, Clone)]
pub struct SparseSymMatrix {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Build from triplets covering the full symmetric pattern
    /// (duplicates are summed). Asymmetry beyond 1e-14 relative is a bug
    /// in the caller and is checked.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; n + 1];
        for &(_, j, _) in triplets {
            count[j + 1] += 1;
        }
        for j in 0..n {
            count[j + 1] += count[j];
        }
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = count.clone();
        for &(i, j, v) in triplets {
            let p = next[j];
            rows[p] = i;
            vals[p] = v;
            next[j] += 1;
        }
        // sort each column and merge duplicates
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            scratch.clear();
            for p in count[j]..count[j + 1] {
                scratch.push((rows[p], vals[p]));
            }
            scratch.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < scratch.len() {
                let r = scratch[k].0;
                let mut v = 0.0;
                while k < scratch.len() && scratch[k].0 == r {
                    v += scratch[k].1;
                    k += 1;
                }
                row_idx.push(r);
                values.push(v);
            }
            col_ptr[j + 1] = row_idx.len();
        }
        let m = SparseSymMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        };
        debug_assert!(m.symmetry_defect() <= 1e-14 * (1.0 + m.max_abs()));
        m
    }

    /// Build from triplets for the lower triangle only (i >= j); the
    /// upper triangle is mirrored.
    pub fn from_lower_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut full = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            debug_assert!(i >= j);
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_triplets(n, &full)
    }

    /// Diagonal matrix.
    pub fn from_diag(d: &[f64]) -> Self {
        let triplets: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &triplets)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        match self.row_idx[lo..hi].binary_search(&i) {
            Ok(p) => self.values[lo + p],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += self.values[p] * xj;
            }
        }
        y
    }

    /// Quadratic form x' A x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for j in 0..self.n {
            let xj = x[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                s += x[self.row_idx[p]] * self.values[p] * xj;
            }
        }
        s
    }

    /// a*self + b*other, pattern union.
    pub fn add_scaled(&self, other: &SparseSymMatrix, a: f64, b: f64) -> SparseSymMatrix {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::with_capacity(self.nnz() + other.nnz());
        let mut values = Vec::with_capacity(self.nnz() + other.nnz());
        for j in 0..n {
            let (mut p, pe) = (self.col_ptr[j], self.col_ptr[j + 1]);
            let (mut q, qe) = (other.col_ptr[j], other.col_ptr[j + 1]);
            while p < pe || q < qe {
                let ri = if p < pe { self.row_idx[p] } else { usize::MAX };
                let rj = if q < qe { other.row_idx[q] } else { usize::MAX };
                if ri == rj {
                    row_idx.push(ri);
                    values.push(a * self.values[p] + b * other.values[q]);
                    p += 1;
                    q += 1;
                } else if ri < rj {
                    row_idx.push(ri);
                    values.push(a * self.values[p]);
                    p += 1;
                } else {
                    row_idx.push(rj);
                    values.push(b * other.values[q]);
                    q += 1;
                }
            }
            col_ptr[j + 1] = row_idx.len();
        }
        SparseSymMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn scaled(&self, s: f64) -> SparseSymMatrix {
        let mut m = self.clone();
        for v in &mut m.values {
            *v *= s;
        }
        m
    }

    /// Same pattern, values replaced by a*x + b*y + c*z of three matrices
    /// sharing this pattern. Used for H-weighted stiffness combinations.
    pub fn combine3(
        x: &SparseSymMatrix,
        y: &SparseSymMatrix,
        z: &SparseSymMatrix,
        a: f64,
        b: f64,
        c: f64,
    ) -> SparseSymMatrix {
        assert_eq!(x.nnz(), y.nnz());
        assert_eq!(x.nnz(), z.nnz());
        let mut m = x.clone();
        for p in 0..m.values.len() {
            m.values[p] = a * x.values[p] + b * y.values[p] + c * z.values[p];
        }
        m
    }

    /// G * diag(d) * G for symmetric G (three-term product via SpGEMM
    /// with a dense scatter workspace).
    pub fn scaled_gram_with_diag(g: &SparseSymMatrix, d: &[f64]) -> SparseSymMatrix {
        let n = g.n;
        assert_eq!(d.len(), n);
        let mut col_ptr = vec![0usize; n + 1];
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        let mut mark = vec![usize::MAX; n];
        let mut work = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        for j in 0..n {
            touched.clear();
            for p in g.col_ptr[j]..g.col_ptr[j + 1] {
                let k = g.row_idx[p];
                let gkj_dk = g.values[p] * d[k];
                for q in g.col_ptr[k]..g.col_ptr[k + 1] {
                    let i = g.row_idx[q];
                    if mark[i] != j {
                        mark[i] = j;
                        work[i] = 0.0;
                        touched.push(i);
                    }
                    work[i] += g.values[q] * gkj_dk;
                }
            }
            touched.sort_unstable();
            for &i in &touched {
                row_idx.push(i);
                values.push(work[i]);
            }
            col_ptr[j + 1] = row_idx.len();
        }
        SparseSymMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    /// Largest |A_ij - A_ji| over the pattern.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                worst = worst.max((self.values[p] - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[p]][j] = self.values[p];
            }
        }
        d
    }

    /// Matrix Market coordinate format, symmetric, lower triangle.
    pub fn write_matrix_market<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let nnz_lower = (0..self.n)
            .flat_map(|j| {
                (self.col_ptr[j]..self.col_ptr[j + 1]).map(move |p| (self.row_idx[p], j))
            })
            .filter(|&(i, j)| i >= j)
            .count();
        writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
        writeln!(w, "{} {} {}", self.n, self.n, nnz_lower)?;
        for j in 0..self.n {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                if i >= j {
                    writeln!(w, "{} {} {:.15e}", i + 1, j + 1, self.values[p])?;
                }
            }
        }
        Ok(())
    }

    pub fn columns(&self) -> impl Iterator<Item = (usize, &[usize], &[f64])> {
        (0..self.n).map(move |j| {
            let lo = self.col_ptr[j];
            let hi = self.col_ptr[j + 1];
            (j, &self.row_idx[lo..hi], &self.values[lo..hi])
        })
    }
}

/// Sparse matrix stored by rows, used for interpolation/observation
/// operators (few nonzeros per row, possibly dense fixed-effect columns).
#[derive(Debug, Clone)]
pub struct RowMatrix {
    ncols: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl RowMatrix {
    pub fn new(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        debug_assert!(rows
            .iter()
            .all(|r| r.iter().all(|&(j, _)| j < ncols)));
        RowMatrix { ncols, rows }
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    /// A' y.
    pub fn t_matvec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r {
                out[j] += v * y[i];
            }
        }
        out
    }

    /// A' A as a symmetric sparse matrix.
    pub fn gram(&self) -> SparseSymMatrix {
        let mut triplets = Vec::new();
        for r in &self.rows {
            for &(j, vj) in r {
                for &(k, vk) in r {
                    triplets.push((j, k, vj * vk));
                }
            }
        }
        SparseSymMatrix::from_triplets(self.ncols, &triplets)
    }

    /// A with one row deleted (for leave-one-out refit oracles).
    pub fn without_row(&self, i: usize) -> RowMatrix {
        let rows = self
            .rows
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != i)
            .map(|(_, r)| r.clone())
            .collect();
        RowMatrix {
            ncols: self.ncols,
            rows,
        }
    }
}

/// Envelope (profile) Cholesky factor A = L L'.
///
/// Fill stays inside the row envelope of A, so for band-ordered meshes
/// the cost is n*b^2 and trailing dense rows (fixed effects) are handled
/// without special cases.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    n: usize,
    first: Vec<usize>, // first stored column of row i
    ptr: Vec<usize>,   // offset of row i in data; row i holds cols first[i]..=i
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.n();
        let mut first = (0..n).collect::<Vec<usize>>();
        for (j, rows, _) in a.columns() {
            for &i in rows {
                if i >= j && j < first[i] {
                    first[i] = j;
                }
            }
        }
        let mut ptr = vec![0usize; n + 1];
        for i in 0..n {
            ptr[i + 1] = ptr[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; ptr[n]];
        for (j, rows, vals) in a.columns() {
            for (&i, &v) in rows.iter().zip(vals) {
                if i >= j {
                    data[ptr[i] + (j - first[i])] = v;
                }
            }
        }
        // in-place row-oriented factorization
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = data[ptr[i] + (j - fi)];
                // dot product of row i and row j over columns lo..j
                let (ri, rj) = {
                    let oi = ptr[i] + (lo - fi);
                    let oj = ptr[j] + (lo - fj);
                    (oi, oj)
                };
                let len = j - lo;
                for k in 0..len {
                    s -= data[ri + k] * data[rj + k];
                }
                if j < i {
                    let ljj = data[ptr[j] + (j - fj)];
                    data[ptr[i] + (j - fi)] = s / ljj;
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::CholeskyFailure { row: i });
                    }
                    data[ptr[i] + (j - fi)] = s.sqrt();
                }
            }
        }
        Ok(EnvelopeCholesky {
            n,
            first,
            ptr,
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// log det A = 2 sum log L_ii.
    pub fn logdet(&self) -> f64 {
        (0..self.n)
            .map(|i| self.data[self.ptr[i] + (i - self.first[i])].ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        // forward: L y = b
        for i in 0..n {
            let fi = self.first[i];
            let mut s = x[i];
            for j in fi..i {
                s -= self.data[self.ptr[i] + (j - fi)] * x[j];
            }
            x[i] = s / self.data[self.ptr[i] + (i - fi)];
        }
        // backward: L' x = y
        for i in (0..n).rev() {
            let fi = self.first[i];
            x[i] /= self.data[self.ptr[i] + (i - fi)];
            let xi = x[i];
            for j in fi..i {
                x[j] -= self.data[self.ptr[i] + (j - fi)] * xi;
            }
        }
    }

    /// Solve L' x = z (used to draw N(0, A^{-1}) samples).
    pub fn solve_lt(&self, z: &[f64]) -> Vec<f64> {
        let mut x = z.to_vec();
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            x[i] /= self.data[self.ptr[i] + (i - fi)];
            let xi = x[i];
            for j in fi..i {
                x[j] -= self.data[self.ptr[i] + (j - fi)] * xi;
            }
        }
        x
    }

    /// Solve with one step of iterative refinement against the original
    /// matrix; keeps the residual at the 1e-10 * ||rhs|| contract even
    /// for ill-conditioned precisions.
    pub fn solve_refined(&self, a: &SparseSymMatrix, b: &[f64]) -> Vec<f64> {
        let mut x = self.solve(b);
        let ax = a.matvec(&x);
        let mut r = vec![0.0; b.len()];
        for i in 0..b.len() {
            r[i] = b[i] - ax[i];
        }
        let dx = self.solve(&r);
        for i in 0..x.len() {
            x[i] += dx[i];
        }
        x
    }
}
