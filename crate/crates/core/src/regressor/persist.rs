//! Binary model files.
//!
//! Layout of a model file (all integers and reals little-endian):
//!
//! | bytes      | content                                          |
//! |------------|--------------------------------------------------|
//! | 0..8       | magic `EVSMODEL`                                 |
//! | 8..12      | `u32` format version                             |
//! | 12..16     | `u32` header length `H`                          |
//! | 16..16+H   | UTF-8 JSON header (kind, shapes, training config)|
//! | then       | `d` x `f64` scaler means                         |
//! | then       | `d` x `f64` scaler standard deviations           |
//! | then       | `n_params` x `f64` parameters                    |
//!
//! FFN parameters follow the in-memory layout (per layer: weights row-major,
//! then biases). Ridge parameters are the weights followed by the intercept.
//!
//! A scaler file is magic `EVSSCALE`, `u32` version, `u32` dimension `d`,
//! then `d` means and `d` standard deviations.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Activation, FfnConfig, FfnModel, Regressor, RidgeModel, ScalerStats};
use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MODEL_MAGIC: &[u8; 8] = b"EVSMODEL";
const SCALER_MAGIC: &[u8; 8] = b"EVSSCALE";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    n_inputs: usize,
    n_params: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    layer_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    activation: Option<Activation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<FfnConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<f64>,
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(e.to_string())
}

fn write_reals<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io_err)
}

fn read_reals<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn check_magic<R: Read>(r: &mut R, magic: &[u8; 8]) -> Result<()> {
    let mut m = [0u8; 8];
    r.read_exact(&mut m).map_err(io_err)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&m),
            String::from_utf8_lossy(magic)
        )));
    }
    let version = read_u32(r)?;
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    Ok(())
}

/// Writes a model with the scaler its inputs were standardized with and,
/// for networks, the training configuration.
pub fn write_model<W: Write>(
    w: &mut W,
    model: &Regressor,
    scaler: &ScalerStats,
    config: Option<&FfnConfig>,
) -> Result<()> {
    if scaler.dim() != model.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: model.n_inputs(),
            found: scaler.dim(),
        });
    }
    let (header, params) = match model {
        Regressor::Ffn(m) => (
            Header {
                kind: "ffn".into(),
                n_inputs: m.n_inputs(),
                n_params: m.params().len(),
                layer_sizes: Some(m.layer_sizes().to_vec()),
                activation: Some(m.activation()),
                config: config.cloned(),
                lambda: None,
            },
            m.params().to_vec(),
        ),
        Regressor::Ridge(m) => {
            let mut p = m.weights.clone();
            p.push(m.intercept);
            (
                Header {
                    kind: "ridge".into(),
                    n_inputs: m.n_inputs(),
                    n_params: p.len(),
                    layer_sizes: None,
                    activation: None,
                    config: None,
                    lambda: Some(m.lambda),
                },
                p,
            )
        }
    };
    let json = serde_json::to_vec(&header)?;
    w.write_all(MODEL_MAGIC).map_err(io_err)?;
    w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(json.len() as u32).to_le_bytes()).map_err(io_err)?;
    w.write_all(&json).map_err(io_err)?;
    write_reals(w, &scaler.mean)?;
    write_reals(w, &scaler.std)?;
    write_reals(w, &params)
}

pub fn read_model<R: Read>(r: &mut R) -> Result<(Regressor, ScalerStats, Option<FfnConfig>)> {
    check_magic(r, MODEL_MAGIC)?;
    let len = read_u32(r)? as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(io_err)?;
    let header: Header = serde_json::from_slice(&json)?;
    let mean = read_reals(r, header.n_inputs)?;
    let std = read_reals(r, header.n_inputs)?;
    let params = read_reals(r, header.n_params)?;
    let scaler = ScalerStats { mean, std };
    let model = match header.kind.as_str() {
        "ffn" => {
            let sizes = header
                .layer_sizes
                .ok_or_else(|| Error::Format("ffn header without layer_sizes".into()))?;
            if sizes.first() != Some(&header.n_inputs) {
                return Err(Error::Format("layer_sizes disagree with n_inputs".into()));
            }
            Regressor::Ffn(FfnModel::from_parts(
                sizes,
                header.activation.unwrap_or_default(),
                params,
            )?)
        }
        "ridge" => {
            if params.len() != header.n_inputs + 1 {
                return Err(Error::Format("ridge parameter count mismatch".into()));
            }
            let mut weights = params;
            let intercept = weights.pop().unwrap();
            Regressor::Ridge(RidgeModel {
                weights,
                intercept,
                lambda: header.lambda.unwrap_or(0.0),
            })
        }
        other => return Err(Error::Format(format!("unknown model kind `{other}`"))),
    };
    Ok((model, scaler, header.config))
}

pub fn write_scaler<W: Write>(w: &mut W, scaler: &ScalerStats) -> Result<()> {
    w.write_all(SCALER_MAGIC).map_err(io_err)?;
    w.write_all(&MODEL_FORMAT_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(scaler.dim() as u32).to_le_bytes()).map_err(io_err)?;
    write_reals(w, &scaler.mean)?;
    write_reals(w, &scaler.std)
}

pub fn read_scaler<R: Read>(r: &mut R) -> Result<ScalerStats> {
    check_magic(r, SCALER_MAGIC)?;
    let d = read_u32(r)? as usize;
    let mean = read_reals(r, d)?;
    let std = read_reals(r, d)?;
    Ok(ScalerStats { mean, std })
}
