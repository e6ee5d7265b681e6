//! Stacked ensemble: several base regressors trained on the same windows,
//! combined either by their arithmetic mean or by a small meta-network fed
//! with one column per base prediction.
//!
//! Base models train on the train split and early-stop on the validation
//! split. The meta-network learns from base predictions on the validation
//! split only, so it never sees rows the bases were fitted on.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::ExtractionParams;
use crate::matrix::Matrix;
use crate::par::Execution;
use crate::regressor::{
    fit_ffn, fit_ridge, read_model, read_scaler, write_model, write_scaler, FfnConfig, FfnModel, Regressor,
    ScalerStats, TrainReport, MODEL_FORMAT_VERSION,
};
use crate::window::WindowSpec;

fn one() -> usize {
    1
}

fn default_lambda() -> f64 {
    1.0
}

/// One entry of the stack configuration; `instances > 1` trains that many
/// copies with distinct seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseModelConfig {
    Ffn {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "one")]
        instances: usize,
        #[serde(default)]
        config: FfnConfig,
    },
    Ridge {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "one")]
        instances: usize,
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
}

impl BaseModelConfig {
    pub fn ffn(hidden: &[usize]) -> Self {
        BaseModelConfig::Ffn {
            name: None,
            instances: 1,
            config: FfnConfig {
                hidden_layers: hidden.to_vec(),
                ..FfnConfig::default()
            },
        }
    }

    pub fn ridge(lambda: f64) -> Self {
        BaseModelConfig::Ridge {
            name: None,
            instances: 1,
            lambda,
        }
    }

    fn base_name(&self) -> String {
        match self {
            BaseModelConfig::Ffn { name: Some(n), .. } | BaseModelConfig::Ridge { name: Some(n), .. } => n.clone(),
            BaseModelConfig::Ffn { config, .. } => {
                let dims: Vec<String> = config.hidden_layers.iter().map(|h| h.to_string()).collect();
                if dims.is_empty() {
                    "ffn_linear".into()
                } else {
                    format!("ffn_{}", dims.join("_"))
                }
            }
            BaseModelConfig::Ridge { lambda, .. } => format!("ridge_{lambda}"),
        }
    }

    fn instances(&self) -> usize {
        match self {
            BaseModelConfig::Ffn { instances, .. } | BaseModelConfig::Ridge { instances, .. } => *instances,
        }
    }
}

/// `{FFN(20,20), FFN(40,40), ridge(1.0)}`.
pub fn default_stack() -> Vec<BaseModelConfig> {
    vec![
        BaseModelConfig::ffn(&[20, 20]),
        BaseModelConfig::ffn(&[40, 40]),
        BaseModelConfig::ridge(1.0),
    ]
}

pub fn default_meta_config() -> FfnConfig {
    FfnConfig {
        hidden_layers: vec![8],
        ..FfnConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    #[default]
    Average,
    MetaFfn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Combiner {
    Average,
    MetaFfn {
        model: FfnModel,
        scaler: ScalerStats,
        config: FfnConfig,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    pub name: String,
    pub model: Regressor,
    pub config: Option<FfnConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedModel {
    pub bases: Vec<BaseModel>,
    pub combiner: Combiner,
    pub scaler: ScalerStats,
    pub spec: WindowSpec,
    pub extraction: Option<ExtractionParams>,
}

/// Raw (unstandardized) feature rows and their overlap targets.
#[derive(Debug, Clone)]
pub struct Split {
    pub rows: Matrix,
    pub targets: Vec<f64>,
}

/// Expands instance counts into `(unique name, config, seed)` triples.
fn expand(configs: &[BaseModelConfig], seed: u64) -> Vec<(String, BaseModelConfig, u64)> {
    let mut out = Vec::new();
    for cfg in configs {
        let base = cfg.base_name();
        let n = cfg.instances();
        for k in 0..n {
            let name = if n > 1 { format!("{base}#{k}") } else { base.clone() };
            let seed = seed.wrapping_add(out.len() as u64);
            out.push((name, cfg.clone(), seed));
        }
    }
    // disambiguate repeated names from distinct entries
    let mut seen = std::collections::HashMap::<String, usize>::new();
    for (name, _, _) in out.iter_mut() {
        let c = seen.entry(name.clone()).or_default();
        if *c > 0 {
            *name = format!("{name}.{c}");
        }
        *c += 1;
    }
    out
}

fn train_base(
    name: &str,
    cfg: &BaseModelConfig,
    seed: u64,
    train: &(Matrix, &[f64]),
    val: &(Matrix, &[f64]),
) -> Result<(BaseModel, TrainReport)> {
    match cfg {
        BaseModelConfig::Ffn { config, .. } => {
            let config = FfnConfig { seed, ..config.clone() };
            let (model, report) = fit_ffn(name, &train.0, train.1, &val.0, val.1, &config)?;
            Ok((
                BaseModel {
                    name: name.to_string(),
                    model: Regressor::Ffn(model),
                    config: Some(config),
                },
                report,
            ))
        }
        BaseModelConfig::Ridge { lambda, .. } => {
            let model = fit_ridge(&train.0, train.1, *lambda)?;
            let mse = |m: &Matrix, y: &[f64]| -> Result<f64> {
                let p = model.predict(m)?;
                Ok(p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len().max(1) as f64)
            };
            let mut params = model.weights.clone();
            params.push(model.intercept);
            let report = TrainReport {
                train_loss: vec![mse(&train.0, train.1)?],
                val_loss: vec![mse(&val.0, val.1)?],
                best_epoch: 0,
                snapshot: format!("{:016x}", crate::regressor::param_hash(&params)),
            };
            Ok((
                BaseModel {
                    name: name.to_string(),
                    model: Regressor::Ridge(model),
                    config: None,
                },
                report,
            ))
        }
    }
}

/// Trains every base model (in parallel under [`Execution::Parallel`],
/// seeds `seed + base index`) and, for [`CombinerKind::MetaFfn`], the
/// meta-network on validation-split base predictions. Returns the stack and
/// one named loss history per trained model, the meta-network last.
#[allow(clippy::too_many_arguments)]
pub fn train_stack(
    train: &Split,
    val: &Split,
    configs: &[BaseModelConfig],
    combiner: CombinerKind,
    meta_config: &FfnConfig,
    spec: WindowSpec,
    seed: u64,
    exec: Execution,
) -> Result<(StackedModel, Vec<(String, TrainReport)>)> {
    if configs.is_empty() {
        return Err(Error::invalid("base_models", "need at least one base model"));
    }
    if configs.iter().any(|c| c.instances() == 0) {
        return Err(Error::invalid("instances", "must be >= 1"));
    }
    let scaler = ScalerStats::fit(&train.rows)?;
    let train_std = (scaler.transform(&train.rows)?, train.targets.as_slice());
    let val_std = (scaler.transform(&val.rows)?, val.targets.as_slice());
    let plan = expand(configs, seed);
    let trained = exec.map(&plan, |(name, cfg, s)| {
        log::info!("training base model `{name}`");
        train_base(name, cfg, *s, &train_std, &val_std)
    });
    let mut bases = Vec::with_capacity(trained.len());
    let mut reports = Vec::with_capacity(trained.len() + 1);
    for r in trained {
        let (base, report) = r?;
        reports.push((base.name.clone(), report));
        bases.push(base);
    }

    let combiner = match combiner {
        CombinerKind::Average => Combiner::Average,
        CombinerKind::MetaFfn => {
            let columns = bases
                .iter()
                .map(|b| b.model.predict(&val_std.0))
                .collect::<Result<Vec<_>>>()?;
            let meta_input = Matrix::from_columns(&columns);
            let config = FfnConfig {
                seed: seed.wrapping_add(bases.len() as u64),
                ..meta_config.clone()
            };
            let (model, scaler, report) = fit_meta(&meta_input, &val.targets, &config)?;
            reports.push(("meta".to_string(), report));
            Combiner::MetaFfn { model, scaler, config }
        }
    };
    Ok((
        StackedModel {
            bases,
            combiner,
            scaler,
            spec,
            extraction: None,
        },
        reports,
    ))
}

/// Fits the combiner network on base predictions (one column per base).
/// The first 80% of rows train it and the last 20% drive early stopping.
pub fn fit_meta(
    base_predictions: &Matrix,
    targets: &[f64],
    config: &FfnConfig,
) -> Result<(FfnModel, ScalerStats, TrainReport)> {
    let n = base_predictions.rows();
    if n < 2 {
        return Err(Error::InvalidData(
            "meta-model needs at least two validation rows".into(),
        ));
    }
    let cut = ((n as f64 * 0.8).round() as usize).clamp(1, n - 1);
    let scaler = ScalerStats::fit(&base_predictions.slice_rows(0..cut))?;
    let x = scaler.transform(base_predictions)?;
    let (model, report) = fit_ffn(
        "meta",
        &x.slice_rows(0..cut),
        &targets[..cut],
        &x.slice_rows(cut..n),
        &targets[cut..],
        config,
    )?;
    Ok((model, scaler, report))
}

/// Mean of one row of base predictions. Summed in sorted order so the result
/// does not depend on base order, and clamped to the row's range.
fn average(row: &mut [f64]) -> f64 {
    row.sort_by(f64::total_cmp);
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    mean.clamp(row[0], row[row.len() - 1])
}

/// Average of per-base prediction columns.
pub fn average_predictions(columns: &[Vec<f64>]) -> Vec<f64> {
    let n = columns.first().map_or(0, Vec::len);
    let mut row = vec![0.0; columns.len()];
    (0..n)
        .map(|i| {
            for (r, c) in row.iter_mut().zip(columns) {
                *r = c[i];
            }
            average(&mut row)
        })
        .collect()
}

impl StackedModel {
    pub fn n_inputs(&self) -> usize {
        self.scaler.dim()
    }

    /// Per-base predictions for raw feature rows.
    pub fn base_predictions(&self, rows: &Matrix) -> Result<Vec<Vec<f64>>> {
        let x = self.scaler.transform(rows)?;
        self.bases.iter().map(|b| b.model.predict(&x)).collect()
    }

    /// Combined prediction in `[0, 1]` for raw feature rows.
    pub fn predict(&self, rows: &Matrix) -> Result<Vec<f64>> {
        let columns = self.base_predictions(rows)?;
        match &self.combiner {
            Combiner::Average => Ok(average_predictions(&columns)),
            Combiner::MetaFfn { model, scaler, .. } => {
                let x = scaler.transform(&Matrix::from_columns(&columns))?;
                model.predict(&x)
            }
        }
    }

    pub fn combiner_kind(&self) -> CombinerKind {
        match self.combiner {
            Combiner::Average => CombinerKind::Average,
            Combiner::MetaFfn { .. } => CombinerKind::MetaFfn,
        }
    }
}

pub fn predict_stack(model: &StackedModel, rows: &Matrix) -> Result<Vec<f64>> {
    model.predict(rows)
}

pub const STACK_MANIFEST: &str = "stack.json";

#[derive(Debug, Serialize, Deserialize)]
struct StackManifest {
    format_version: u32,
    window_spec: WindowSpec,
    extraction: Option<ExtractionParams>,
    n_inputs: usize,
    scaler: String,
    bases: Vec<ComponentEntry>,
    combiner: CombinerEntry,
}

#[derive(Debug, Serialize, Deserialize)]
struct ComponentEntry {
    name: String,
    kind: String,
    file: String,
    format_version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct CombinerEntry {
    kind: CombinerKind,
    file: String,
    format_version: u32,
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

fn open(path: &Path) -> Result<BufReader<fs::File>> {
    Ok(BufReader::new(fs::File::open(path).map_err(|e| Error::io(path, e))?))
}

/// Writes the stack into `dir`: one model file per base, the scaler, the
/// combiner and a `stack.json` manifest. Returns the written file names.
pub fn save_stack(model: &StackedModel, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    let mut bases = Vec::new();
    for (i, b) in model.bases.iter().enumerate() {
        let safe: String = b
            .name
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '_' || c == '.' {
                    c
                } else {
                    '-'
                }
            })
            .collect();
        let file = format!("base_{i:02}_{safe}.bin");
        let path = dir.join(&file);
        let mut w = create(&path)?;
        write_model(&mut w, &b.model, &model.scaler, b.config.as_ref())?;
        w.flush().map_err(|e| Error::io(&path, e))?;
        bases.push(ComponentEntry {
            name: b.name.clone(),
            kind: b.model.kind().into(),
            file: file.clone(),
            format_version: MODEL_FORMAT_VERSION,
        });
        files.push(file);
    }
    let scaler_file = "scaler.bin".to_string();
    let path = dir.join(&scaler_file);
    let mut w = create(&path)?;
    write_scaler(&mut w, &model.scaler)?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    files.push(scaler_file.clone());

    let combiner_file = match &model.combiner {
        Combiner::Average => {
            let file = "combiner.json".to_string();
            let path = dir.join(&file);
            fs::write(&path, b"{\"kind\":\"average\"}\n").map_err(|e| Error::io(&path, e))?;
            file
        }
        Combiner::MetaFfn {
            model: m,
            scaler,
            config,
        } => {
            let file = "combiner.bin".to_string();
            let path = dir.join(&file);
            let mut w = create(&path)?;
            write_model(&mut w, &Regressor::Ffn(m.clone()), scaler, Some(config))?;
            w.flush().map_err(|e| Error::io(&path, e))?;
            file
        }
    };
    files.push(combiner_file.clone());

    let manifest = StackManifest {
        format_version: MODEL_FORMAT_VERSION,
        window_spec: model.spec,
        extraction: model.extraction,
        n_inputs: model.n_inputs(),
        scaler: scaler_file,
        bases,
        combiner: CombinerEntry {
            kind: model.combiner_kind(),
            file: combiner_file,
            format_version: MODEL_FORMAT_VERSION,
        },
    };
    let path = dir.join(STACK_MANIFEST);
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    files.push(STACK_MANIFEST.to_string());
    Ok(files)
}

pub fn load_stack(dir: &Path) -> Result<StackedModel> {
    let path = dir.join(STACK_MANIFEST);
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: StackManifest = serde_json::from_slice(&text)?;
    if manifest.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported stack format version {}",
            manifest.format_version
        )));
    }
    let scaler = read_scaler(&mut open(&dir.join(&manifest.scaler))?)?;
    if scaler.dim() != manifest.n_inputs {
        return Err(Error::Format("scaler dimension disagrees with manifest".into()));
    }
    let mut bases = Vec::new();
    for entry in &manifest.bases {
        let (model, _, config) = read_model(&mut open(&dir.join(&entry.file))?)?;
        if model.n_inputs() != manifest.n_inputs {
            return Err(Error::Format(format!("`{}` has the wrong input dimension", entry.name)));
        }
        bases.push(BaseModel {
            name: entry.name.clone(),
            model,
            config,
        });
    }
    if bases.is_empty() {
        return Err(Error::Format("stack has no base models".into()));
    }
    let combiner = match manifest.combiner.kind {
        CombinerKind::Average => Combiner::Average,
        CombinerKind::MetaFfn => {
            let (model, scaler, config) = read_model(&mut open(&dir.join(&manifest.combiner.file))?)?;
            let Regressor::Ffn(model) = model else {
                return Err(Error::Format("meta combiner must be a network".into()));
            };
            Combiner::MetaFfn {
                model,
                scaler,
                config: config.unwrap_or_else(default_meta_config),
            }
        }
    };
    Ok(StackedModel {
        bases,
        combiner,
        scaler,
        spec: manifest.window_spec,
        extraction: manifest.extraction,
    })
}
