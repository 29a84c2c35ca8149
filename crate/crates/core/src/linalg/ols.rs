//! Closed-form least squares: the unconstrained map and the variant whose
//! outputs are forced orthogonal to a guarded subspace.

use super::decomp::spd_solve;
use super::matrix::Matrix;
use super::projection::Projection;
use super::{LinalgError, Result};

/// Minimizes `|W U - V|_F^2` over `W`, returning `W = V U^T (U U^T)^{-1}`.
///
/// `u` is `i x n` (keys as columns), `v` is `o x n` (values as columns),
/// and the result is `o x i`. Fails with `SingularGram` when `U U^T` is
/// numerically singular and `DimensionMismatch` when sample counts differ.
pub fn solve_ols(u: &Matrix, v: &Matrix) -> Result<Matrix> {
    if u.cols() != v.cols() {
        return Err(LinalgError::DimensionMismatch(format!(
            "keys carry {} samples, values {}",
            u.cols(),
            v.cols()
        )));
    }
    let gram = u.matmul_bt(u); // U U^T, i x i
    let vut = v.matmul_bt(u); // V U^T, o x i
    // W G = V U^T with symmetric G: solve G W^T = (V U^T)^T.
    let wt = spd_solve(&gram, &vut.transpose())?;
    Ok(wt.transpose())
}

/// Minimizes `|W U - V|_F^2` subject to every output `W x` lying orthogonal
/// to the guarded subspace `C`.
///
/// The solution is `(I - P_c) V U^T (U U^T)^{-1}`: the unconstrained solution
/// with the guarded component of the values projected away. Because the
/// projector multiplies from the left, `P_c W x = 0` holds for *every* input
/// `x`, not just the training keys.
pub fn solve_constrained_ols(u: &Matrix, v: &Matrix, guard: &Projection) -> Result<Matrix> {
    if guard.dim() != v.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "guard dimension {} != output dimension {}",
            guard.dim(),
            v.rows()
        )));
    }
    let unconstrained = solve_ols(u, v)?;
    Ok(guard.matrix().matmul(&unconstrained))
}

#[cfg(test)]
mod tests {
    use super::super::projection_from_basis;
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn randn(rng: &mut impl Rng, rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |_, _| {
            // Box-Muller keeps the test free of distribution deps.
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        })
    }

    #[test]
    fn identity_keys_return_values() {
        let u = Matrix::identity(2);
        let v = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let w = solve_ols(&u, &v).unwrap();
        assert!(w.max_abs_diff(&v) < 1e-12);
    }

    #[test]
    fn recovers_known_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = randn(&mut rng, 3, 8);
        let w0 = randn(&mut rng, 2, 3);
        let v = w0.matmul(&u);
        let w = solve_ols(&u, &v).unwrap();
        assert!(w.sub(&w0).frobenius_norm() < 1e-9);
    }

    #[test]
    fn rank_deficient_gram_is_rejected() {
        let u = Matrix::from_rows(&[&[1.0, 1.0], &[0.0, 0.0]]);
        let v = Matrix::from_rows(&[&[1.0, 2.0]]);
        assert!(matches!(
            solve_ols(&u, &v),
            Err(LinalgError::SingularGram { .. })
        ));
    }

    #[test]
    fn residual_is_orthogonal_to_keys() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = randn(&mut rng, 4, 20);
        let v = randn(&mut rng, 3, 20);
        let w = solve_ols(&u, &v).unwrap();
        let resid = w.matmul(&u).sub(&v);
        let cross = resid.matmul_bt(&u);
        assert!(cross.frobenius_norm() < 1e-8 * v.frobenius_norm());
    }

    #[test]
    fn hand_applied_theorem_on_scalar_key() {
        // u = [1], v = (3, 4), C = span(e1): the constrained solution zeroes
        // the first output coordinate and keeps the second untouched.
        let u = Matrix::from_rows(&[&[1.0]]);
        let v = Matrix::from_rows(&[&[3.0], &[4.0]]);
        let guard =
            projection_from_basis(&Matrix::from_rows(&[&[1.0], &[0.0]])).unwrap();
        let w = solve_constrained_ols(&u, &v, &guard).unwrap();
        let expect = Matrix::from_rows(&[&[0.0], &[4.0]]);
        assert!(w.max_abs_diff(&expect) < 1e-12);
        // outputs orthogonal to e1
        let out = w.mul_vec(&[1.0]);
        assert!(out[0].abs() < 1e-12);
    }

    #[test]
    fn empty_guard_matches_unconstrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let u = randn(&mut rng, 3, 10);
        let v = randn(&mut rng, 2, 10);
        let guard = Projection::identity(2);
        let constrained = solve_constrained_ols(&u, &v, &guard).unwrap();
        let plain = solve_ols(&u, &v).unwrap();
        assert!(constrained.max_abs_diff(&plain) < 1e-14);
    }

    #[test]
    fn constrained_cost_beats_feasible_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u = randn(&mut rng, 4, 20);
        let v = randn(&mut rng, 3, 20);
        let basis = randn(&mut rng, 3, 1);
        let guard = projection_from_basis(&basis).unwrap();
        let w = solve_constrained_ols(&u, &v, &guard).unwrap();
        let base_cost = w.matmul(&u).sub(&v).frobenius_norm().powi(2);
        for _ in 0..1000 {
            // Feasible direction: rows stay orthogonal to C.
            let d = guard.matrix().matmul(&randn(&mut rng, 3, 4));
            let perturbed = w.add(&d.scale(1e-2));
            let cost = perturbed.matmul(&u).sub(&v).frobenius_norm().powi(2);
            assert!(cost + 1e-12 >= base_cost);
        }
    }

    #[test]
    fn constrained_outputs_annihilated_for_any_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let u = randn(&mut rng, 5, 24);
        let v = randn(&mut rng, 4, 24);
        let basis = randn(&mut rng, 4, 2);
        let guard = projection_from_basis(&basis).unwrap();
        let w = solve_constrained_ols(&u, &v, &guard).unwrap();
        let p_c = guard.complement();
        for _ in 0..100 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
            let wx = w.mul_vec(&x);
            let leak = p_c.mul_vec(&wx);
            let num = leak.iter().map(|v| v * v).sum::<f64>().sqrt();
            let den = wx.iter().map(|v| v * v).sum::<f64>().sqrt() + 1e-30;
            assert!(num / den < 1e-8);
        }
    }
}
