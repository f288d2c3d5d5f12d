//! Compressed sparse row matrices.

use crate::error::{Error, Result};

/// A matrix in compressed sparse row form. Column indices are strictly
/// increasing within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Assemble from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(
                r < nrows && c < ncols,
                "triplet ({r}, {c}) outside {nrows}x{ncols}"
            );
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            cols[next[r]] = c;
            vals[next[r]] = v;
            next[r] += 1;
        }
        let mut row_offsets = Vec::with_capacity(nrows + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut order: Vec<usize> = Vec::new();
        for i in 0..nrows {
            let (lo, hi) = (counts[i], counts[i + 1]);
            order.clear();
            order.extend(lo..hi);
            order.sort_by_key(|&p| cols[p]);
            for &p in &order {
                match col_indices.last() {
                    Some(&last) if col_indices.len() > row_offsets[i] && last == cols[p] => {
                        *values.last_mut().expect("non-empty") += vals[p];
                    }
                    _ => {
                        col_indices.push(cols[p]);
                        values.push(vals[p]);
                    }
                }
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Build from raw CSR arrays, validating the structure.
    pub fn from_csr(
        nrows: usize,
        ncols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let bad = |reason: &str| Error::Format {
            what: "CSR matrix",
            reason: reason.to_string(),
        };
        if row_offsets.len() != nrows + 1 || row_offsets[0] != 0 {
            return Err(bad("row offsets length"));
        }
        if col_indices.len() != values.len()
            || *row_offsets.last().expect("non-empty") != values.len()
        {
            return Err(bad("nonzero count"));
        }
        for i in 0..nrows {
            let row = &col_indices[row_offsets[i]..row_offsets[i + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= ncols) {
                return Err(bad(
                    "column indices must be strictly increasing and in range",
                ));
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            nrows: n,
            ncols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
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

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entries of row `i` as `(column, value)` pairs.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.col_indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// Position of entry `(i, j)` in the value array, if stored.
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        self.col_indices[lo..hi]
            .binary_search(&j)
            .ok()
            .map(|p| lo + p)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |p| self.values[p])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(
            x.len(),
            self.ncols,
            "vector length does not match matrix columns"
        );
        assert_eq!(
            y.len(),
            self.nrows,
            "output length does not match matrix rows"
        );
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        (0..self.nrows)
            .map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>())
            .sum()
    }

    /// `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &SparseMatrix, beta: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.nrows {
            triplets.extend(self.row(i).map(|(j, v)| (i, j, alpha * v)));
            triplets.extend(other.row(i).map(|(j, v)| (i, j, beta * v)));
        }
        Ok(SparseMatrix::from_triplets(
            self.nrows, self.ncols, &triplets,
        ))
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            triplets.extend(self.row(i).map(|(j, v)| (j, i, v)));
        }
        SparseMatrix::from_triplets(self.ncols, self.nrows, &triplets)
    }

    /// Sparse product `self * rhs`.
    pub fn matmul(&self, rhs: &SparseMatrix) -> Result<Self> {
        if self.ncols != rhs.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: rhs.nrows,
            });
        }
        let mut accumulator = vec![0.0; rhs.ncols];
        let mut touched: Vec<usize> = Vec::new();
        let mut marker = vec![false; rhs.ncols];
        let mut row_offsets = Vec::with_capacity(self.nrows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in rhs.row(k) {
                    if !marker[j] {
                        marker[j] = true;
                        touched.push(j);
                    }
                    accumulator[j] += a * b;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                col_indices.push(j);
                values.push(accumulator[j]);
                accumulator[j] = 0.0;
                marker[j] = false;
            }
            touched.clear();
            row_offsets.push(col_indices.len());
        }
        Ok(SparseMatrix {
            nrows: self.nrows,
            ncols: rhs.ncols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }

    pub(crate) fn check_same_shape(&self, other: &SparseMatrix) -> Result<()> {
        if self.nrows != other.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: other.nrows,
            });
        }
        if self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: other.ncols,
            });
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = SparseMatrix::from_triplets(
            2,
            3,
            &[(0, 2, 1.0), (0, 0, 2.0), (0, 2, 3.0), (1, 1, -1.0)],
        );
        assert_eq!(a.col_indices(), &[0, 2, 1]);
        assert_eq!(a.values(), &[2.0, 4.0, -1.0]);
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn empty_rows() {
        let a = SparseMatrix::from_triplets(3, 3, &[(2, 2, 1.0)]);
        assert_eq!(a.row_offsets(), &[0, 0, 0, 1]);
        assert_eq!(a.mul_vec(&[1.0, 1.0, 5.0]), vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = SparseMatrix::from_triplets(2, 3, &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0)]);
        let b = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 1, 4.0), (1, 0, 5.0), (2, 0, 6.0), (2, 1, 7.0)],
        );
        let c = a.matmul(&b).unwrap().to_dense();
        assert_eq!(c, vec![vec![12.0, 18.0], vec![15.0, 0.0]]);
        assert!(b.matmul(&b).is_err());
    }

    #[test]
    fn csr_validation() {
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 2, 3], vec![1, 0, 1], vec![1.0; 3]).is_err());
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 2, 3], vec![0, 1, 1], vec![1.0; 3]).is_ok());
    }

    #[test]
    fn transpose_and_bilinear() {
        let a = SparseMatrix::from_triplets(2, 2, &[(0, 1, 2.0), (1, 0, 3.0)]);
        let x = [1.0, 2.0];
        let y = [3.0, 4.0];
        assert_eq!(a.bilinear(&x, &y), a.transpose().bilinear(&y, &x));
        let s = a.linear_combination(1.0, &a.transpose(), 1.0).unwrap();
        assert_eq!(s.to_dense(), vec![vec![0.0, 5.0], vec![5.0, 0.0]]);
    }
}
