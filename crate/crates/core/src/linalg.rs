//! Sparse assembly and symmetric positive definite solves.

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix};

use crate::error::{Error, Result};

/// Triplet accumulator for a square sparse matrix; duplicates are summed
/// on conversion.
#[derive(Debug, Clone)]
pub struct Triplets {
    n: usize,
    coo: CooMatrix<f64>,
}

impl Triplets {
    pub fn new(n: usize) -> Self {
        Triplets {
            n,
            coo: CooMatrix::new(n, n),
        }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.coo.push(i, j, v);
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn to_csc(&self) -> CscMatrix<f64> {
        CscMatrix::from(&self.coo)
    }
}

/// `y = A x` for a CSC matrix.
pub fn csc_mul(a: &CscMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; a.nrows()];
    for (j, col) in a.col_iter().enumerate() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        for (&i, &v) in col.row_indices().iter().zip(col.values()) {
            y[i] += v * xj;
        }
    }
    y
}

/// Cholesky factorization of a sparse SPD matrix.
///
/// If the plain factorization breaks down (a semidefinite or slightly
/// indefinite tangent), a diagonal shift `δ·max diag` is added with `δ`
/// growing from 1e-14 to 1e-6; the applied shift is reported.
pub struct SpdSolver {
    chol: CscCholesky<f64>,
    n: usize,
    shift: f64,
}

impl SpdSolver {
    pub fn factor(a: &CscMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("empty system".into()));
        }
        if let Ok(chol) = CscCholesky::factor(a) {
            return Ok(SpdSolver { chol, n, shift: 0.0 });
        }
        let max_diag = a
            .diagonal_as_csc()
            .values()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut delta = 1e-14;
        while delta <= 1e-6 {
            let shift = delta * max_diag;
            let mut coo = CooMatrix::new(n, n);
            for (i, j, v) in a.triplet_iter() {
                coo.push(i, j, *v);
            }
            for i in 0..n {
                coo.push(i, i, shift);
            }
            if let Ok(chol) = CscCholesky::factor(&CscMatrix::from(&coo)) {
                return Ok(SpdSolver { chol, n, shift });
            }
            delta *= 100.0;
        }
        Err(Error::NumericalDegeneracy(
            "tangent matrix is not positive definite even after diagonal shifting".into(),
        ))
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        let b = DMatrix::from_column_slice(self.n, 1, rhs);
        self.chol.solve(&b).as_slice().to_vec()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
