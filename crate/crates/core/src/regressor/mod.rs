//! Base regressors mapping flattened windows to an overlap score.

mod ffn;
mod persist;
mod ridge;
mod scaler;

pub(crate) use ffn::fnv1a as param_hash;
pub use ffn::{fit_ffn, Activation, FfnConfig, FfnModel, TrainReport};
pub use persist::{read_model, read_scaler, write_model, write_scaler, MODEL_FORMAT_VERSION};
pub use ridge::{fit_ridge, RidgeModel};
pub use scaler::ScalerStats;

use crate::error::Result;
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Regressor {
    Ffn(FfnModel),
    Ridge(RidgeModel),
}

impl Regressor {
    pub fn n_inputs(&self) -> usize {
        match self {
            Regressor::Ffn(m) => m.n_inputs(),
            Regressor::Ridge(m) => m.n_inputs(),
        }
    }

    /// Predictions in `[0, 1]` for already-standardized rows.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        match self {
            Regressor::Ffn(m) => m.predict(rows),
            Regressor::Ridge(m) => m.predict(rows),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Regressor::Ffn(_) => "ffn",
            Regressor::Ridge(_) => "ridge",
        }
    }
}
