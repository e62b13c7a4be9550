//! Dense row-major and CSR sparse matrices of `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major dense matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from equally long rows. An empty slice yields `0 x cols`
    /// only through [`DenseMatrix::zeros`]; here it gives `0 x 0`.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            values.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.cols + j] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        out
    }

    /// Copies the given rows (duplicates allowed) into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Result<DenseMatrix> {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::IndexOutOfBounds {
                    index: i,
                    len: self.rows,
                });
            }
            values.extend_from_slice(self.row(i));
        }
        Ok(DenseMatrix {
            rows: idx.len(),
            cols: self.cols,
            values,
        })
    }

    /// Sparse copy; exact zeros are dropped.
    pub fn to_sparse(&self) -> SparseMatrix {
        let mut b = SparseBuilder::new(self.cols);
        for i in 0..self.rows {
            b.push_dense_row(self.row(i));
        }
        b.finish()
    }
}

/// Borrowed view of one CSR row.
#[derive(Debug, Clone, Copy)]
pub struct SparseRow<'a> {
    pub indices: &'a [usize],
    pub values: &'a [f64],
}

impl<'a> SparseRow<'a> {
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + 'a {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn get(&self, col: usize) -> f64 {
        match self.indices.binary_search(&col) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }
}

/// CSR matrix. Column indices are strictly increasing within a row and no
/// explicit zeros are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(cols: usize) -> Self {
        Self {
            rows: 0,
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a matrix from per-row `(column, value)` lists. Entries must
    /// be in strictly increasing column order; zeros are dropped.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut b = SparseBuilder::new(cols);
        for r in rows {
            b.push_row(r)?;
        }
        Ok(b.finish())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        SparseRow {
            indices: &self.indices[a..b],
            values: &self.values[a..b],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).get(j)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let dst = out.row_mut(i);
            for (j, v) in self.row(i).iter() {
                dst[j] = v;
            }
        }
        out
    }

    pub fn select_rows(&self, idx: &[usize]) -> Result<SparseMatrix> {
        let mut b = SparseBuilder::new(self.cols);
        for &i in idx {
            if i >= self.rows {
                return Err(Error::IndexOutOfBounds {
                    index: i,
                    len: self.rows,
                });
            }
            b.push_row_unchecked(self.row(i));
        }
        Ok(b.finish())
    }

    /// Transpose, which doubles as a CSC view of `self`.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &j in &self.indices {
            counts[j + 1] += 1;
        }
        for j in 0..self.cols {
            counts[j + 1] += counts[j];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.rows {
            for (j, v) in self.row(i).iter() {
                let slot = next[j];
                indices[slot] = i;
                values[slot] = v;
                next[j] += 1;
            }
        }
        SparseMatrix {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Scales every stored value.
    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut b = SparseBuilder::new(self.cols);
        for i in 0..self.rows {
            let row: Vec<(usize, f64)> = self.row(i).iter().map(|(j, v)| (j, c * v)).collect();
            b.push_row(&row).expect("scaling preserves column order");
        }
        b.finish()
    }
}

/// Incremental row-by-row CSR construction.
#[derive(Debug, Clone)]
pub struct SparseBuilder {
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseBuilder {
    pub fn new(cols: usize) -> Self {
        Self {
            cols,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, entries: &[(usize, f64)]) -> Result<()> {
        let start = self.indices.len();
        let mut last: Option<usize> = None;
        for &(j, v) in entries {
            let bad = j >= self.cols || last.is_some_and(|l| j <= l) || !v.is_finite();
            if bad {
                self.indices.truncate(start);
                self.values.truncate(start);
                return Err(if j >= self.cols {
                    Error::IndexOutOfBounds {
                        index: j,
                        len: self.cols,
                    }
                } else if !v.is_finite() {
                    Error::InvalidData(format!("non-finite value in column {j}"))
                } else {
                    Error::InvalidData(format!("column {j} is not strictly increasing"))
                });
            }
            last = Some(j);
            if v != 0.0 {
                self.indices.push(j);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
        Ok(())
    }

    pub fn push_dense_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.cols);
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                self.indices.push(j);
                self.values.push(v);
            }
        }
        self.indptr.push(self.indices.len());
    }

    fn push_row_unchecked(&mut self, row: SparseRow<'_>) {
        self.indices.extend_from_slice(row.indices);
        self.values.extend_from_slice(row.values);
        self.indptr.push(self.indices.len());
    }

    pub fn finish(self) -> SparseMatrix {
        SparseMatrix {
            rows: self.indptr.len() - 1,
            cols: self.cols,
            indptr: self.indptr,
            indices: self.indices,
            values: self.values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn builder_rejects_unsorted_and_out_of_range() {
        let mut b = SparseBuilder::new(4);
        assert!(b.push_row(&[(2, 1.0), (1, 1.0)]).is_err());
        assert!(b.push_row(&[(4, 1.0)]).is_err());
        assert!(b.push_row(&[(1, 1.0), (1, 2.0)]).is_err());
        b.push_row(&[(0, 1.0), (3, 0.0)]).unwrap();
        let m = b.finish();
        assert_eq!(m.rows(), 1);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn transpose_matches_dense_transpose() {
        let m = SparseMatrix::from_rows(3, &[vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, -3.0)]]).unwrap();
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }

    #[test]
    fn dense_rejects_non_finite() {
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::from_vec(1, 2, vec![1.0]).is_err());
    }

    proptest! {
        #[test]
        fn dense_sparse_round_trip(rows in 0usize..8, cols in 1usize..8, seed in any::<u64>()) {
            let mut state = seed;
            let mut vals = Vec::new();
            for _ in 0..rows * cols {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let v = if (state >> 60) < 9 { 0.0 } else { ((state >> 11) as f64) / (1u64 << 53) as f64 - 0.5 };
                vals.push(v);
            }
            let dense = DenseMatrix::from_vec(rows, cols, vals).unwrap();
            let sparse = dense.to_sparse();
            prop_assert!(sparse.values().iter().all(|&v| v != 0.0));
            prop_assert_eq!(sparse.to_dense(), dense.clone());
            prop_assert_eq!(sparse.to_dense().to_sparse(), sparse);
        }
    }
}
