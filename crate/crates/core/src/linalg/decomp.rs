//! Factorizations: cyclic Jacobi eigendecomposition for symmetric matrices,
//! Cholesky with jitter escalation for SPD solves, and a small Gaussian
//! elimination for general square systems.

use super::matrix::Matrix;
use super::{LinalgError, Result, GRAM_CONDITION_LIMIT};

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns, in
/// descending eigenvalue order. Intended for the small symmetric systems this
/// crate inverts (Gram matrices, cross-covariance squares); not tuned for
/// large `n`.
pub fn sym_eigen(a: &Matrix) -> (Vec<f64>, Matrix) {
    assert_eq!(a.rows(), a.cols(), "sym_eigen on non-square matrix");
    let n = a.rows();
    if n == 0 {
        return (Vec::new(), Matrix::zeros(0, 0));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = a.max_abs().max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0;
        for r in 0..n {
            for c in (r + 1)..n {
                off += m.get(r, c) * m.get(r, c);
            }
        }
        if off.sqrt() <= 1e-14 * scale * n as f64 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = m.get(p, p);
                let aqq = m.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                // Stable tangent of the rotation angle.
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.set(k, p, c * mkp - s * mkq);
                    m.set(k, q, s * mkp + c * mkq);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.set(p, k, c * mpk - s * mqk);
                    m.set(q, k, s * mpk + c * mqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(j, j).partial_cmp(&m.get(i, i)).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_c, v.get(r, old_c));
        }
    }
    (values, vectors)
}

/// Spectral condition number of a symmetric positive semidefinite matrix.
/// Returns `f64::INFINITY` when the smallest eigenvalue is non-positive.
pub fn spd_condition(g: &Matrix) -> f64 {
    let (vals, _) = sym_eigen(g);
    if vals.is_empty() {
        return 1.0; // empty system is trivially well conditioned
    }
    let max = vals[0];
    let min = *vals.last().unwrap();
    if max <= 0.0 || min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Cholesky factor `L` (lower triangular, `L L^T = A`), or `None` when a
/// pivot fails.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if !(sum > 0.0) || !sum.is_finite() {
                    return None;
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Some(l)
}

fn solve_cholesky(l: &Matrix, rhs: &Matrix) -> Matrix {
    let n = l.rows();
    let m = rhs.cols();
    // Forward: L y = rhs
    let mut y = rhs.clone();
    for i in 0..n {
        for k in 0..i {
            let lik = l.get(i, k);
            for c in 0..m {
                let v = y.get(i, c) - lik * y.get(k, c);
                y.set(i, c, v);
            }
        }
        let d = l.get(i, i);
        for c in 0..m {
            y.set(i, c, y.get(i, c) / d);
        }
    }
    // Backward: L^T x = y
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l.get(k, i);
            for c in 0..m {
                let v = y.get(i, c) - lki * y.get(k, c);
                y.set(i, c, v);
            }
        }
        let d = l.get(i, i);
        for c in 0..m {
            y.set(i, c, y.get(i, c) / d);
        }
    }
    y
}

/// Solves `G X = B` for symmetric positive definite `G`.
///
/// The conditioning gate runs first: a Gram matrix whose spectral condition
/// exceeds [`GRAM_CONDITION_LIMIT`] is reported as [`LinalgError::SingularGram`].
/// Past the gate, Cholesky is attempted with escalating diagonal jitter
/// (`1e-12 * trace/d`, growing tenfold up to `1e-6 * trace/d`) so that
/// near-collinear but admissible systems still factor.
pub fn spd_solve(g: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    assert_eq!(g.rows(), g.cols());
    assert_eq!(g.rows(), rhs.rows());
    let n = g.rows();
    if n == 0 {
        return Ok(Matrix::zeros(0, rhs.cols()));
    }

    let cond = spd_condition(g);
    if !cond.is_finite() || cond > GRAM_CONDITION_LIMIT {
        return Err(LinalgError::SingularGram {
            cond,
            limit: GRAM_CONDITION_LIMIT,
        });
    }

    if let Some(l) = cholesky(g) {
        return Ok(solve_cholesky(&l, rhs));
    }
    let base = g.trace() / n as f64;
    let mut jitter = 1e-12 * base;
    while jitter <= 1e-6 * base {
        let mut gj = g.clone();
        for i in 0..n {
            gj.set(i, i, gj.get(i, i) + jitter);
        }
        if let Some(l) = cholesky(&gj) {
            return Ok(solve_cholesky(&l, rhs));
        }
        jitter *= 10.0;
    }
    Err(LinalgError::SingularGram {
        cond,
        limit: GRAM_CONDITION_LIMIT,
    })
}

/// Solves the square system `A X = B` by Gaussian elimination with partial
/// pivoting. Used for the small non-symmetric systems inside PLS.
pub fn solve_general(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    assert_eq!(a.rows(), a.cols());
    assert_eq!(a.rows(), b.rows());
    let n = a.rows();
    let m = b.cols();
    let mut aug = Matrix::zeros(n, n + m);
    for r in 0..n {
        aug.row_mut(r)[..n].copy_from_slice(a.row(r));
        aug.row_mut(r)[n..].copy_from_slice(b.row(r));
    }
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                aug.get(i, col)
                    .abs()
                    .partial_cmp(&aug.get(j, col).abs())
                    .unwrap()
            })
            .unwrap();
        let pivot = aug.get(pivot_row, col);
        if pivot.abs() < 1e-300 {
            return Err(LinalgError::NumericalFailure(
                "singular system in solve_general".into(),
            ));
        }
        if pivot_row != col {
            for c in 0..n + m {
                let tmp = aug.get(col, c);
                aug.set(col, c, aug.get(pivot_row, c));
                aug.set(pivot_row, c, tmp);
            }
        }
        let inv = 1.0 / aug.get(col, col);
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = aug.get(r, col) * inv;
            if factor == 0.0 {
                continue;
            }
            for c in col..n + m {
                let v = aug.get(r, c) - factor * aug.get(col, c);
                aug.set(r, c, v);
            }
        }
    }
    let mut x = Matrix::zeros(n, m);
    for r in 0..n {
        let inv = 1.0 / aug.get(r, r);
        for c in 0..m {
            x.set(r, c, aug.get(r, n + c) * inv);
        }
    }
    Ok(x)
}
