//! Linear bias model: `y = a_s x_s + a_f x_f + b_0`, fit by ordinary least
//! squares over the observations.

use serde::Serialize;

use super::observations::BiasObservation;
use super::{EvalError, Result};
use crate::linalg::{solve_ols, spd_condition, Matrix};

/// Condition ceiling for the regression design.
const DESIGN_CONDITION_LIMIT: f64 = 1e10;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BiasRegressionFit {
    pub a_s: f64,
    pub a_f: f64,
    pub b0: f64,
    pub r2: f64,
    pub n: usize,
}

/// Fits the three-parameter model on `(x_s, x_f, 1)`.
pub fn fit_bias_regression(observations: &[BiasObservation]) -> Result<BiasRegressionFit> {
    fit_xy(
        &observations
            .iter()
            .map(|o| (o.x_s, o.x_f, o.y))
            .collect::<Vec<_>>(),
    )
}

/// Regression entry point on raw `(x_s, x_f, y)` triples, shared with the
/// tracer (which regresses restored scores rather than observations).
pub fn fit_xy(points: &[(f64, f64, f64)]) -> Result<BiasRegressionFit> {
    let n = points.len();
    if n < 3 {
        return Err(EvalError::DegenerateDesign(format!(
            "need at least 3 observations, got {n}"
        )));
    }
    let mut design = Matrix::zeros(3, n);
    let mut values = Matrix::zeros(1, n);
    for (i, &(x_s, x_f, y)) in points.iter().enumerate() {
        design.set(0, i, x_s);
        design.set(1, i, x_f);
        design.set(2, i, 1.0);
        values.set(0, i, y);
    }
    let gram = design.matmul_bt(&design);
    let cond = spd_condition(&gram);
    if !cond.is_finite() || cond > DESIGN_CONDITION_LIMIT {
        return Err(EvalError::DegenerateDesign(format!(
            "design condition {cond:.3e} exceeds {DESIGN_CONDITION_LIMIT:.1e}"
        )));
    }
    let w = solve_ols(&design, &values)?;
    let a_s = w.get(0, 0);
    let a_f = w.get(0, 1);
    let b0 = w.get(0, 2);

    let mean_y: f64 = points.iter().map(|p| p.2).sum::<f64>() / n as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(x_s, x_f, y) in points {
        let pred = a_s * x_s + a_f * x_f + b0;
        ss_res += (y - pred) * (y - pred);
        ss_tot += (y - mean_y) * (y - mean_y);
    }
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };

    Ok(BiasRegressionFit { a_s, a_f, b0, r2, n })
}

impl BiasRegressionFit {
    pub fn predict(&self, x_s: f64, x_f: f64) -> f64 {
        self.a_s * x_s + self.a_f * x_f + self.b0
    }
}
