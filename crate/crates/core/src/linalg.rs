//! Thin wrappers over faer: sparse SPD factorization with a reusable
//! symbolic analysis, a dense LU solve, and a thin SVD.

use faer::linalg::solvers::{Solve, SolveCore};
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use faer::{MatMut, MatRef, Side};

use crate::error::{Error, Result};

/// Lower-triangular CSC pattern of a symmetric matrix plus its symbolic
/// Cholesky analysis (fill-reducing ordering included).
#[derive(Debug, Clone)]
pub struct SpdPattern {
    n: usize,
    symbolic_mat: SymbolicSparseColMat<usize>,
    symbolic: SymbolicLlt<usize>,
}

impl SpdPattern {
    /// `columns[j]` lists the (sorted, unique) rows `i >= j` stored in column `j`.
    pub fn new(columns: &[Vec<usize>]) -> Result<Self> {
        let n = columns.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for (j, rows) in columns.iter().enumerate() {
            debug_assert!(rows.windows(2).all(|w| w[0] < w[1]));
            debug_assert!(rows.first().is_none_or(|&r| r >= j));
            row_idx.extend_from_slice(rows);
            col_ptr.push(row_idx.len());
        }
        let symbolic_mat = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        let symbolic = SymbolicLlt::try_new(symbolic_mat.as_ref(), Side::Lower)
            .map_err(|e| Error::Singular(format!("symbolic analysis failed: {e:?}")))?;
        Ok(Self {
            n,
            symbolic_mat,
            symbolic,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.symbolic_mat.row_idx().len()
    }

    /// Position of entry `(row, col)` (with `row >= col`) in the value array.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let ptr = self.symbolic_mat.col_ptr();
        let rows = &self.symbolic_mat.row_idx()[ptr[col]..ptr[col + 1]];
        rows.binary_search(&row).ok().map(|k| ptr[col] + k)
    }

    pub fn factorize(&self, values: &[f64]) -> Result<SpdFactor> {
        let mat = SparseColMatRef::new(self.symbolic_mat.as_ref(), values);
        let llt = Llt::try_new_with_symbolic(self.symbolic.clone(), mat, Side::Lower)
            .map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(SpdFactor { llt })
    }
}

pub struct SpdFactor {
    llt: Llt<usize, f64>,
}

impl SpdFactor {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, 1));
    }

    /// Solves for several right-hand sides stored column-major in `rhs`.
    pub fn solve_columns(&self, rhs: &mut [f64], ncols: usize) {
        let n = rhs.len() / ncols.max(1);
        self.llt
            .solve_in_place(MatMut::from_column_major_slice_mut(rhs, n, ncols));
    }
}

/// Solves the dense system `a x = b` (`a` column-major, `n x n`) with
/// partial-pivot LU.
pub fn dense_solve(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: a.len(),
        });
    }
    let mat = MatRef::from_column_major_slice(a, n, n);
    let lu = mat.partial_piv_lu();
    let mut x = b.to_vec();
    lu.solve_in_place_with_conj(
        faer::Conj::No,
        MatMut::from_column_major_slice_mut(&mut x, n, 1),
    );
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("dense LU produced non-finite values".into()));
    }
    Ok(x)
}

/// Thin SVD of a column-major `rows x cols` matrix. Returns left singular
/// vectors (column-major, `rows x k`) and singular values (`k = min(rows, cols)`).
pub fn thin_svd(data: &[f64], rows: usize, cols: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let a = MatRef::from_column_major_slice(data, rows, cols);
    let svd = a
        .thin_svd()
        .map_err(|e| Error::Singular(format!("SVD did not converge: {e:?}")))?;
    let u = svd.U();
    let k = u.ncols();
    let mut left = Vec::with_capacity(rows * k);
    for j in 0..k {
        for i in 0..rows {
            left.push(u[(i, j)]);
        }
    }
    let s = svd.S().column_vector();
    let sigma = (0..k).map(|i| s[i]).collect();
    Ok((left, sigma))
}
