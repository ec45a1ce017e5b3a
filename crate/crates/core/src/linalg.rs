//! Small dense linear-algebra helpers shared by the models.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative diagonal jitter applied once when a Cholesky factorization fails.
pub const JITTER_SCALE: f64 = 1e-12;

/// Cholesky factor of a symmetric positive-definite matrix.
///
/// Factorization is attempted as-is first. On failure the diagonal is
/// lifted by `1e-12 * trace / n` and the factorization retried exactly once.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
    jittered: bool,
}

impl SpdFactor {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch {
                context: "SPD factorization (square)",
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix passed to Cholesky".into()));
        }
        if let Some(chol) = Cholesky::new(matrix.clone()) {
            return Ok(SpdFactor {
                chol,
                jittered: false,
            });
        }
        let n = matrix.nrows();
        let jitter = JITTER_SCALE * matrix.trace().abs() / n.max(1) as f64;
        let mut lifted = matrix.clone();
        for i in 0..n {
            lifted[(i, i)] += jitter;
        }
        Cholesky::new(lifted)
            .map(|chol| SpdFactor {
                chol,
                jittered: true,
            })
            .ok_or_else(|| {
                Error::Conditioning(format!(
                    "{n}x{n} matrix is not positive definite (jitter {jitter:.3e} insufficient)"
                ))
            })
    }

    pub fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    /// Whether the jitter fallback was needed.
    pub fn jittered(&self) -> bool {
        self.jittered
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    pub fn lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn ln_determinant(&self) -> f64 {
        let l = self.chol.l_dirty();
        2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
    }
}

/// Largest absolute asymmetry `|A_ij - A_ji|`.
pub fn asymmetry(matrix: &DMatrix<f64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    worst
}

/// Kronecker product `a ⊗ b`.
pub fn kronecker(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-major vectorization.
pub fn vec_of(matrix: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(matrix.as_slice())
}

/// Inverse of [`vec_of`] for a square `n x n` matrix.
pub fn unvec(v: &DVector<f64>, n: usize) -> Result<DMatrix<f64>> {
    crate::error::check_len("unvec", n * n, v.len())?;
    Ok(DMatrix::from_column_slice(n, n, v.as_slice()))
}
