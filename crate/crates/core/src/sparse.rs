//! Minimal compressed-row sparse matrix.
//!
//! Matrices are built from coordinate triplets (duplicates are summed) and
//! then frozen. Only the handful of products the solvers need are provided.

use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, value)` triplets; repeated positions are
    /// summed and explicit zeros are kept.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    /// Builds from whole rows given as `(columns, values)` in order.
    pub fn from_rows(ncols: usize, rows: impl IntoIterator<Item = (Vec<usize>, Vec<f64>)>) -> Self {
        let mut row_ptr = vec![0usize];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for (cols, vals) in rows {
            debug_assert_eq!(cols.len(), vals.len());
            debug_assert!(cols.iter().all(|&c| c < ncols));
            col_idx.extend(cols);
            values.extend(vals);
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: row_ptr.len() - 1,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if m[(i, j)] != 0.0 {
                    trip.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), &trip)
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

    /// Largest absolute stored entry, `0` for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter()
            .position(|&c| c == j)
            .map(|p| vals[p])
            .unwrap_or(0.0)
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
    }

    /// `A·x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row_dot(i, x)).collect()
    }

    /// `Aᵀ·y`
    pub fn tmul_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        self.tmul_add(y, &mut out);
        out
    }

    /// `out += Aᵀ·y`
    pub fn tmul_add(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            if yi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out[c] += v * yi;
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((c, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &trip)
    }

    /// Triplets of `Aᵀ·A`.
    pub fn gram_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut trip = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&a, &va) in cols.iter().zip(vals) {
                for (&b, &vb) in cols.iter().zip(vals) {
                    trip.push((a, b, va * vb));
                }
            }
        }
        trip
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            trip.extend(cols.iter().zip(vals).map(|(&c, &v)| (i, c, v)));
        }
        trip
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                m[(i, c)] += v;
            }
        }
        m
    }

    /// `xᵀ·A·x` for square `A`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        (0..self.nrows).map(|i| x[i] * self.row_dot(i, x)).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.ncols);
        let mut out = self.clone();
        let offset = out.col_idx.len();
        out.col_idx.extend_from_slice(&other.col_idx);
        out.values.extend_from_slice(&other.values);
        out.row_ptr
            .extend(other.row_ptr.iter().skip(1).map(|p| p + offset));
        out.nrows += other.nrows;
        out
    }
}
