//! Symmetric-definite eigenvalue helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("linear system is singular")]
    Singular,
}

pub fn check_square(m: &DMatrix<f64>) -> Result<usize, LinalgError> {
    if m.nrows() != m.ncols() {
        return Err(LinalgError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Symmetric within `SYMMETRY_TOL` (relative to the largest entry) and
/// positive definite.
pub fn check_spd(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    check_square(m)?;
    let scale = m.amax().max(1.0);
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > SYMMETRY_TOL * scale {
        return Err(LinalgError::NotSymmetric { asymmetry });
    }
    if symmetric_eigenvalues(m).iter().any(|&l| l <= 0.0) {
        return Err(LinalgError::NotPositiveDefinite);
    }
    Ok(())
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Ascending eigenvalues of the symmetric part of `m`.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut values: Vec<f64> = SymmetricEigen::new(symmetrize(m)).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    values
}

/// Ascending eigenvalues of the pencil `a v = lambda b v`, `a` symmetric and
/// `b` SPD, through the congruence `L^{-1} a L^{-T}` with `b = L L^T`.
pub fn generalized_eigenvalues(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<Vec<f64>, LinalgError> {
    let n = check_square(a)?;
    if check_square(b)? != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: b.nrows(),
        });
    }
    let chol = symmetrize(b).cholesky().ok_or(LinalgError::NotPositiveDefinite)?;
    let l = chol.l();
    let y = l
        .solve_lower_triangular(&symmetrize(a))
        .ok_or(LinalgError::Singular)?;
    // C = L^{-1} A L^{-T} = (L^{-1} (L^{-1} A)^T)^T
    let c = l
        .solve_lower_triangular(&y.transpose())
        .ok_or(LinalgError::Singular)?
        .transpose();
    Ok(symmetric_eigenvalues(&c))
}

pub fn largest_generalized_eigenvalue(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64, LinalgError> {
    Ok(*generalized_eigenvalues(a, b)?.last().expect("nonempty pencil"))
}

/// Solves `A^T P + P A = -Q` through the Kronecker form.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let n = check_square(a)?;
    if check_square(q)? != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: q.nrows(),
        });
    }
    let identity = DMatrix::<f64>::identity(n, n);
    // vec(A^T P + P A) = (I ⊗ A^T + A^T ⊗ I) vec(P) in column-major vec
    let system = identity.kronecker(&a.transpose()) + a.transpose().kronecker(&identity);
    let rhs = nalgebra::DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let solution = system.lu().solve(&rhs).ok_or(LinalgError::Singular)?;
    let p = DMatrix::from_column_slice(n, n, solution.as_slice());
    Ok(symmetrize(&p))
}
