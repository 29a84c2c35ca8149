//! Orthogonal projections that annihilate a guarded subspace.

use super::decomp::spd_solve;
use super::matrix::Matrix;
use super::{LinalgError, Result};

/// Orthogonal projection onto the complement of a guarded subspace `C`.
///
/// `matrix` is `P = I - B (B^T B)^{-1} B^T` for `basis` columns `B` spanning
/// `C`, so `P` is symmetric, idempotent, and sends every vector of `C` to
/// zero. The projector onto `C` itself is available as [`Projection::complement`].
#[derive(Clone, Debug)]
pub struct Projection {
    matrix: Matrix,
    basis: Matrix,
}

impl Projection {
    /// Projection with an empty guarded subspace (`C = {0}`): the identity.
    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: Matrix::identity(dim),
            basis: Matrix::zeros(dim, 0),
        }
    }

    /// The annihilating projector `P` (dimension `d x d`).
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Columns spanning the guarded subspace (`d x d_n`).
    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    /// The projector onto the guarded subspace, `P_c = I - P`.
    pub fn complement(&self) -> Matrix {
        Matrix::identity(self.dim()).sub(&self.matrix)
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Dimension of the guarded subspace `d_n`.
    pub fn guarded_dim(&self) -> usize {
        self.basis.cols()
    }

    /// Rank of `P`, reported as the rounded trace (exact for idempotent
    /// matrices).
    pub fn rank(&self) -> usize {
        self.matrix.trace().round() as usize
    }

    pub fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(v)
    }
}

/// Builds `P = I - B (B^T B)^{-1} B^T` from independent basis columns.
///
/// Errors with [`LinalgError::SingularGram`] when `B^T B` is numerically
/// singular (dependent or near-dependent columns). An empty basis yields the
/// identity projection.
pub fn projection_from_basis(basis: &Matrix) -> Result<Projection> {
    let d = basis.rows();
    let d_n = basis.cols();
    if d_n == 0 {
        return Ok(Projection::identity(d));
    }
    if d_n > d {
        return Err(LinalgError::DimensionMismatch(format!(
            "basis has {} columns in dimension {}",
            d_n, d
        )));
    }
    let gram = basis.matmul_at(basis); // B^T B, d_n x d_n
    let solved = spd_solve(&gram, &basis.transpose())?; // (B^T B)^{-1} B^T
    let p_c = basis.matmul(&solved);
    let mut p = Matrix::identity(d).sub(&p_c);
    // Symmetrize to remove last-bit asymmetry from the solve.
    let pt = p.transpose();
    for (v, w) in p.data_mut().iter_mut().zip(pt.data()) {
        *v = 0.5 * (*v + w);
    }

    let proj = Projection {
        matrix: p,
        basis: basis.clone(),
    };
    validate(&proj)?;
    Ok(proj)
}

fn validate(p: &Projection) -> Result<()> {
    let m = p.matrix();
    let sym_err = m.max_abs_diff(&m.transpose());
    if sym_err > 1e-10 {
        return Err(LinalgError::NumericalFailure(format!(
            "projection not symmetric: max asymmetry {sym_err:.3e}"
        )));
    }
    let idem_err = m.matmul(m).sub(m).frobenius_norm();
    if idem_err > 1e-8 {
        return Err(LinalgError::NumericalFailure(format!(
            "projection not idempotent: |P^2 - P|_F = {idem_err:.3e}"
        )));
    }
    if p.basis.cols() > 0 {
        let annihilation = m.matmul(&p.basis).frobenius_norm();
        let scale = p.basis.frobenius_norm().max(1e-300);
        if annihilation / scale > 1e-8 {
            return Err(LinalgError::NumericalFailure(format!(
                "projection does not annihilate its basis: {annihilation:.3e}"
            )));
        }
    }
    let expected_rank = (p.dim() - p.guarded_dim()) as f64;
    if (m.trace() - expected_rank).abs() > 1e-6 {
        return Err(LinalgError::NumericalFailure(format!(
            "projection trace {} != expected rank {}",
            m.trace(),
            expected_rank
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn axis_aligned_basis_in_r2() {
        let e1 = Matrix::from_rows(&[&[1.0], &[0.0]]);
        let p = projection_from_basis(&e1).unwrap();
        let expect = Matrix::from_rows(&[&[0.0, 0.0], &[0.0, 1.0]]);
        assert!(p.matrix().max_abs_diff(&expect) < 1e-14);
        assert_eq!(p.rank(), 1);
    }

    #[test]
    fn duplicated_column_is_singular() {
        let b = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]);
        assert!(matches!(
            projection_from_basis(&b),
            Err(LinalgError::SingularGram { .. })
        ));
    }

    #[test]
    fn random_basis_rank_and_idempotence() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let basis = Matrix::from_fn(8, 3, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let p = projection_from_basis(&basis).unwrap();
        assert!((p.matrix().trace() - 5.0).abs() < 1e-6);
        let p2 = p.matrix().matmul(p.matrix());
        assert!(p2.sub(p.matrix()).frobenius_norm() < 1e-8);
        assert!(p.matrix().matmul(&basis).frobenius_norm() < 1e-8);
    }

    #[test]
    fn empty_basis_gives_identity() {
        let b = Matrix::zeros(4, 0);
        let p = projection_from_basis(&b).unwrap();
        assert_eq!(p.matrix(), &Matrix::identity(4));
        assert_eq!(p.rank(), 4);
        assert_eq!(p.guarded_dim(), 0);
    }
}
