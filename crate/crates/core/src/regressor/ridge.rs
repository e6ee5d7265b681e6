use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Closed-form ridge regression with an unpenalized intercept.
/// Predictions are clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub lambda: f64,
}

/// Solves `(Xc'Xc + lambda I) w = Xc'(y - mean(y))` on column-centred
/// inputs by Cholesky factorization; the intercept absorbs the means.
pub fn fit_ridge(rows: &Matrix, targets: &[f64], lambda: f64) -> Result<RidgeModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    let (n, d) = (rows.rows(), rows.cols());
    if n == 0 || n != targets.len() {
        return Err(Error::InvalidData(format!(
            "ridge needs matching non-empty rows/targets ({n} rows, {} targets)",
            targets.len()
        )));
    }
    let col_mean: Vec<f64> = (0..d)
        .map(|j| rows.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let y_mean = targets.iter().sum::<f64>() / n as f64;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centred = vec![0.0; d];
    for (r, y) in rows.iter_rows().zip(targets) {
        for j in 0..d {
            centred[j] = r[j] - col_mean[j];
        }
        let yc = y - y_mean;
        for a in 0..d {
            rhs[a] += centred[a] * yc;
            for b in a..d {
                gram[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
        gram[(a, a)] += lambda;
    }
    let scale = (0..d).map(|a| gram[(a, a)]).fold(0.0, f64::max);
    let chol = gram.cholesky().ok_or(Error::Singular { lambda })?;
    // exactly collinear columns can survive factorization with a round-off pivot
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|p| p * p)
        .fold(f64::INFINITY, f64::min);
    if d > 0 && min_pivot <= scale * d as f64 * f64::EPSILON {
        return Err(Error::Singular { lambda });
    }
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { lambda });
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&col_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeModel {
        weights,
        intercept,
        lambda,
    })
}

impl RidgeModel {
    pub fn n_inputs(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let raw = self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        raw.clamp(0.0, 1.0)
    }

    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        if rows.cols() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                found: rows.cols(),
            });
        }
        Ok(rows.iter_rows().map(|r| self.predict_row(r)).collect())
    }
}
