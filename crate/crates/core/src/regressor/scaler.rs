use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-column mean and population standard deviation, fitted once on the
/// training split and reused unchanged for every other split and at
/// inference. Constant columns get a standard deviation of 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ScalerStats {
    pub fn fit(rows: &Matrix) -> Result<Self> {
        if rows.rows() == 0 {
            return Err(Error::InvalidData("cannot fit scaler on zero rows".into()));
        }
        let (n, d) = (rows.rows(), rows.cols());
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for j in 0..d {
            let col = || rows.iter_rows().map(move |r| r[j]);
            let (lo, hi) = col().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo == hi {
                // exact pass-through: x - mean is exactly 0
                mean[j] = lo;
                std[j] = 1.0;
                continue;
            }
            let m = col().sum::<f64>() / n as f64;
            let var = col().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            mean[j] = m;
            std[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, rows: &Matrix) -> Result<Matrix> {
        if rows.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: rows.cols(),
            });
        }
        let mut out = rows.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }
}
