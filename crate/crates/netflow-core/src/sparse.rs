//! Minimal CSR sparse matrices over exact or floating scalars.
//!
//! Networks at desk scale have at most a few thousand edges, so the point of
//! this type is not performance but exactness and a canonical form: entries
//! are kept sorted by (row, col), duplicates are summed and exact zeros are
//! dropped, which makes `PartialEq` a meaningful entrywise comparison.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul};
use num_traits::Zero;

/// Sparse matrix in CSR layout with canonicalized entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T> SparseMatrix<T>
where
    T: Copy + PartialEq + Zero + Add<Output = T> + Mul<Output = T>,
{
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_ptr: vec![0; rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds from (row, col, value) triplets; duplicates are summed, zeros dropped.
    ///
    /// Panics if an index is out of range (indices come from validated graphs).
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut acc: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for &(r, c, v) in triplets {
            assert!(r < rows && c < cols, "triplet index out of range");
            let slot = acc.entry((r, c)).or_insert_with(T::zero);
            *slot = *slot + v;
        }
        let mut m = Self::zeros(rows, cols);
        let mut row_counts = vec![0usize; rows];
        let entries: Vec<((usize, usize), T)> =
            acc.into_iter().filter(|&(_, v)| v != T::zero()).collect();
        for &((r, _), _) in &entries {
            row_counts[r] += 1;
        }
        m.row_ptr = vec![0; rows + 1];
        for r in 0..rows {
            m.row_ptr[r + 1] = m.row_ptr[r] + row_counts[r];
        }
        m.col_idx = entries.iter().map(|&((_, c), _)| c).collect();
        m.values = entries.iter().map(|&(_, v)| v).collect();
        m
    }

    pub fn from_dense(dense: &[Vec<T>]) -> Self {
        let rows = dense.len();
        let cols = dense.first().map_or(0, Vec::len);
        let mut triplets = Vec::new();
        for (r, row) in dense.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged dense input");
            for (c, &v) in row.iter().enumerate() {
                if v != T::zero() {
                    triplets.push((r, c, v));
                }
            }
        }
        Self::from_triplets(rows, cols, &triplets)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => T::zero(),
        }
    }

    /// Iterates stored entries as (row, col, value) in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.col_idx[k], self.values[k]))
    }

    pub fn transpose(&self) -> Self {
        let triplets: Vec<(usize, usize, T)> = self.iter().map(|(r, c, v)| (c, r, v)).collect();
        Self::from_triplets(self.cols, self.rows, &triplets)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            let mut acc: BTreeMap<usize, T> = BTreeMap::new();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    let slot = acc.entry(c).or_insert_with(T::zero);
                    *slot = *slot + a * b;
                }
            }
            triplets.extend(acc.into_iter().map(|(c, v)| (r, c, v)));
        }
        Self::from_triplets(self.rows, other.cols, &triplets)
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "matvec shape mismatch");
        let mut y = vec![T::zero(); self.rows];
        for (r, c, v) in self.iter() {
            y[r] = y[r] + v * x[c];
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut dense = vec![vec![T::zero(); self.cols]; self.rows];
        for (r, c, v) in self.iter() {
            dense[r][c] = v;
        }
        dense
    }

    /// Entrywise transform keeping the shape; produced zeros are dropped.
    pub fn map<U, F>(&self, f: F) -> SparseMatrix<U>
    where
        U: Copy + PartialEq + Zero + Add<Output = U> + Mul<Output = U>,
        F: Fn(usize, usize, T) -> U,
    {
        let triplets: Vec<(usize, usize, U)> =
            self.iter().map(|(r, c, v)| (r, c, f(r, c, v))).collect();
        SparseMatrix::from_triplets(self.rows, self.cols, &triplets)
    }

    /// Extracts the principal submatrix on the first `rows` x `cols` block.
    pub fn principal_block(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols);
        let triplets: Vec<(usize, usize, T)> = self
            .iter()
            .filter(|&(r, c, _)| r < rows && c < cols)
            .collect();
        Self::from_triplets(rows, cols, &triplets)
    }

    /// Returns true when the sparsity patterns (stored entry positions) agree.
    pub fn same_pattern<U>(&self, other: &SparseMatrix<U>) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.row_ptr == other.row_ptr
            && self.col_idx == other.col_idx
    }
}

impl SparseMatrix<f64> {
    pub fn identity(n: usize) -> Self {
        let triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &triplets)
    }

    /// Maximum absolute column sum, the operator norm on finitely supported
    /// l1 sequences.
    pub fn l1_operator_norm(&self) -> f64 {
        let mut sums = vec![0.0; self.cols];
        for (_, c, v) in self.iter() {
            sums[c] += libm::fabs(v);
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for (_, c, v) in self.iter() {
            sums[c] += v;
        }
        sums
    }
}

impl SparseMatrix<i64> {
    pub fn to_f64(&self) -> SparseMatrix<f64> {
        self.map(|_, _, v| v as f64)
    }
}
