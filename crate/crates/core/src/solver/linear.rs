//! Sparse direct solves backed by faer's supernodal LU.
//!
//! faer works on compressed columns; the CSR arrays of `A` are exactly the CSC
//! arrays of `A^T`, so we factor `A^T` and solve with its transpose.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;

use crate::error::{Error, Result};
use crate::sparse::{norm2, SparseMatrix};

/// Relative residual every solve must reach.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

const REFINEMENT_STEPS: usize = 3;

fn transposed_view(a: &SparseMatrix) -> SparseColMatRef<'_, usize, f64> {
    let symbolic = SymbolicSparseColMatRef::new_checked(
        a.ncols(),
        a.nrows(),
        a.row_offsets(),
        None,
        a.col_indices(),
    );
    SparseColMatRef::new(symbolic, a.values())
}

fn map_lu_error(err: LuError) -> Error {
    match err {
        LuError::SymbolicSingular { index } => {
            Error::SingularMatrix(format!("structurally singular at column {index}"))
        }
        LuError::Generic(e) => Error::SingularMatrix(format!("factorization failed: {e:?}")),
    }
}

/// Symbolic analysis (fill-reducing ordering and elimination structure) of a
/// sparsity pattern, reusable across matrices with the same pattern.
#[derive(Debug, Clone)]
pub struct SparseLu {
    symbolic: SymbolicLu<usize>,
    n: usize,
    nnz: usize,
}

impl SparseLu {
    pub fn analyze(a: &SparseMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                found: a.ncols(),
            });
        }
        let symbolic = SymbolicLu::try_new(transposed_view(a).symbolic())
            .map_err(|e| Error::SingularMatrix(format!("symbolic analysis failed: {e:?}")))?;
        Ok(SparseLu {
            symbolic,
            n: a.nrows(),
            nnz: a.nnz(),
        })
    }

    /// Numeric factorization of a matrix with the analyzed pattern.
    pub fn factor(&self, a: &SparseMatrix) -> Result<LuFactors> {
        if a.nrows() != self.n || a.nnz() != self.nnz {
            return Err(Error::DimensionMismatch {
                expected: self.nnz,
                found: a.nnz(),
            });
        }
        let lu = Lu::try_new_with_symbolic(self.symbolic.clone(), transposed_view(a))
            .map_err(map_lu_error)?;
        Ok(LuFactors { lu, n: self.n })
    }
}

pub struct LuFactors {
    lu: Lu<usize, f64>,
    n: usize,
}

impl LuFactors {
    /// Raw triangular solves, no residual check.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        let n = self.n;
        self.lu
            .solve_transpose_in_place(MatMut::from_column_major_slice_mut(&mut x, n, 1));
        x
    }

    /// Solve `A x = b` and enforce the residual contract, applying a few
    /// steps of iterative refinement if the first solve falls short.
    pub fn solve_checked(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        let bound = RESIDUAL_TOLERANCE * norm2(b);
        let mut x = self.solve(b);
        let mut residual = vec![0.0; self.n];
        for step in 0..=REFINEMENT_STEPS {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::SingularMatrix(
                    "non-finite solution (numerically singular)".into(),
                ));
            }
            a.mul_vec_into(&x, &mut residual);
            residual.iter_mut().zip(b).for_each(|(r, bi)| *r = bi - *r);
            let rnorm = norm2(&residual);
            if rnorm <= bound {
                return Ok(x);
            }
            if step == REFINEMENT_STEPS {
                return Err(Error::LinearSolve {
                    residual: rnorm,
                    bound,
                });
            }
            let dx = self.solve(&residual);
            x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
        }
        unreachable!("loop returns on its last iteration")
    }
}

/// One-shot `A x = b` with `||A x - b|| <= 1e-10 ||b||`.
pub fn sparse_solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.len(),
        });
    }
    SparseLu::analyze(a)?.factor(a)?.solve_checked(a, b)
}
