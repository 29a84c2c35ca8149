//! NIPALS partial least squares (PLS2): paired latent directions maximizing
//! cross-covariance between two blocks.
//!
//! Both blocks are mean-centered; only the X block is deflated. With that
//! choice the extracted x-weights are pairwise orthogonal, which is what
//! downstream projection construction relies on.

use super::decomp::solve_general;
use super::matrix::{dot, norm2, Matrix};
use super::{LinalgError, Result};

/// Inner-loop score tolerance.
const INNER_TOL: f64 = 1e-10;
/// Inner-loop iteration cap.
const MAX_INNER_ITERS: usize = 500;

/// Result of a NIPALS PLS2 fit.
///
/// `b1` holds the x-weights (one column per component, pairwise orthogonal).
/// `b0` is the intercept of the induced regression `y ≈ coef · x + b0`.
#[derive(Clone, Debug)]
pub struct PlsFit {
    b1: Matrix,
    b0: Matrix,
    coef: Matrix,
    n_components: usize,
    converged: Vec<bool>,
    x_mean: Vec<f64>,
    y_mean: Vec<f64>,
}

impl PlsFit {
    /// X-block weights, `input-dim x n_components`; columns span the latent
    /// subspace the fit extracted from the X block.
    pub fn b1(&self) -> &Matrix {
        &self.b1
    }

    /// Regression intercept, `output-dim x 1`.
    pub fn b0(&self) -> &Matrix {
        &self.b0
    }

    /// Regression coefficients, `output-dim x input-dim`.
    pub fn coef(&self) -> &Matrix {
        &self.coef
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Per-component flags: `true` when the inner loop met the score
    /// tolerance before the iteration cap.
    pub fn converged(&self) -> &[bool] {
        &self.converged
    }

    pub fn x_mean(&self) -> &[f64] {
        &self.x_mean
    }

    pub fn y_mean(&self) -> &[f64] {
        &self.y_mean
    }

    /// Predicts the Y block for new samples (columns of `x`).
    pub fn predict(&self, x: &Matrix) -> Matrix {
        assert_eq!(x.rows(), self.coef.cols(), "predict: feature dimension mismatch");
        let mut out = self.coef.matmul(x);
        for r in 0..out.rows() {
            let b = self.b0.get(r, 0);
            for v in out.row_mut(r) {
                *v += b;
            }
        }
        out
    }
}

/// Fits NIPALS PLS2 of `y` (`targets x n`) against `x` (`features x n`).
///
/// Component `k` maximizes covariance between x-scores and y-scores after
/// deflation of components `1..k-1` from the X block. Fails with
/// [`LinalgError::DegenerateInput`] when a block has no variance, when
/// `n_components` is zero or exceeds `min(features, n)`, or when the X block
/// runs out of signal before all requested components are extracted.
pub fn fit_pls(x: &Matrix, y: &Matrix, n_components: usize) -> Result<PlsFit> {
    let p = x.rows();
    let q = y.rows();
    let n = x.cols();
    if y.cols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "x carries {} samples, y {}",
            n,
            y.cols()
        )));
    }
    if n_components == 0 {
        return Err(LinalgError::DegenerateInput(
            "n_components must be at least 1".into(),
        ));
    }
    if n < 2 {
        return Err(LinalgError::DegenerateInput(
            "at least 2 samples required".into(),
        ));
    }
    if n_components > p.min(n) {
        return Err(LinalgError::DegenerateInput(format!(
            "n_components {} exceeds min(features {}, samples {})",
            n_components, p, n
        )));
    }

    let mut xd = x.clone();
    let x_mean = xd.center_rows();
    let mut yc = y.clone();
    let y_mean = yc.center_rows();

    let x_scale = xd.frobenius_norm();
    let y_scale = yc.frobenius_norm();
    if x_scale < 1e-300 {
        return Err(LinalgError::DegenerateInput(
            "x block has zero variance in all features".into(),
        ));
    }
    if y_scale < 1e-300 {
        return Err(LinalgError::DegenerateInput(
            "y block has zero variance in all features".into(),
        ));
    }

    let mut weights = Matrix::zeros(p, n_components);
    let mut x_loadings = Matrix::zeros(p, n_components);
    let mut y_loadings = Matrix::zeros(q, n_components);
    let mut converged = Vec::with_capacity(n_components);

    for comp in 0..n_components {
        // Deterministic start: the y row with the largest sum of squares.
        let start = (0..q)
            .max_by(|&a, &b| {
                let sa = dot(yc.row(a), yc.row(a));
                let sb = dot(yc.row(b), yc.row(b));
                sa.partial_cmp(&sb).unwrap()
            })
            .unwrap();
        let mut u: Vec<f64> = yc.row(start).to_vec();
        let mut t_prev = vec![0.0; n];
        let mut t = vec![0.0; n];
        let mut flag = false;

        for _ in 0..MAX_INNER_ITERS {
            // x-weights from the current y-score.
            let mut w: Vec<f64> = (0..p).map(|r| dot(xd.row(r), &u)).collect();
            let wn = norm2(&w);
            if wn < 1e-300 * x_scale.max(1.0) {
                return Err(LinalgError::DegenerateInput(format!(
                    "x block exhausted at component {comp}"
                )));
            }
            for v in &mut w {
                *v /= wn;
            }
            // x-scores.
            for (i, ti) in t.iter_mut().enumerate() {
                *ti = (0..p).map(|r| xd.get(r, i) * w[r]).sum();
            }
            let tt = dot(&t, &t);
            if tt < 1e-300 {
                return Err(LinalgError::DegenerateInput(format!(
                    "zero x-scores at component {comp}"
                )));
            }
            // y-weights and refreshed y-score.
            let c: Vec<f64> = (0..q).map(|r| dot(yc.row(r), &t) / tt).collect();
            let cc = dot(&c, &c);
            if cc < 1e-300 {
                return Err(LinalgError::DegenerateInput(format!(
                    "y block uncorrelated with x at component {comp}"
                )));
            }
            for (i, ui) in u.iter_mut().enumerate() {
                *ui = (0..q).map(|r| yc.get(r, i) * c[r]).sum::<f64>() / cc;
            }

            let delta: f64 = t
                .iter()
                .zip(&t_prev)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let t_norm = tt.sqrt();
            t_prev.copy_from_slice(&t);
            if delta <= INNER_TOL * t_norm.max(1.0) {
                flag = true;
                weights.set_col(comp, &w);
                break;
            }
            weights.set_col(comp, &w);
        }
        converged.push(flag);

        let tt = dot(&t, &t);
        let p_load: Vec<f64> = (0..p).map(|r| dot(xd.row(r), &t) / tt).collect();
        let q_load: Vec<f64> = (0..q).map(|r| dot(yc.row(r), &t) / tt).collect();
        x_loadings.set_col(comp, &p_load);
        y_loadings.set_col(comp, &q_load);

        // Deflate the X block only.
        for r in 0..p {
            let pl = p_load[r];
            for (i, v) in xd.row_mut(r).iter_mut().enumerate() {
                *v -= pl * t[i];
            }
        }
    }

    // Regression coefficients on the original centered blocks:
    // R = W (P^T W)^{-1}, coef = Q R^T.
    let ptw = x_loadings.matmul_at(&weights); // k x k
    let inv = solve_general(&ptw, &Matrix::identity(n_components)).map_err(|_| {
        LinalgError::NumericalFailure("ill-conditioned loading/weight system in PLS".into())
    })?;
    let rotations = weights.matmul(&inv); // p x k
    let coef = y_loadings.matmul_bt(&rotations); // q x p

    let mut b0 = Matrix::zeros(q, 1);
    let coef_xmean = coef.mul_vec(&x_mean);
    for r in 0..q {
        b0.set(r, 0, y_mean[r] - coef_xmean[r]);
    }

    Ok(PlsFit {
        b1: weights,
        b0,
        coef,
        n_components,
        converged,
        x_mean,
        y_mean,
    })
}
