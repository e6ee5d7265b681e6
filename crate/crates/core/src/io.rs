//! CSV ingestion, the JSON run configuration, and the output-directory
//! layout written by a fit.
//!
//! Every real written to CSV uses 17 significant digits, which reads back
//! to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::ensemble::{default_meta_config, default_stack, save_stack, BaseModelConfig, CombinerKind, StackedModel};
use crate::error::{Error, Result};
use crate::extraction::{ExtractionGrids, ExtractionParams};
use crate::metrics::{Histogram, ScoreReport};
use crate::regressor::{FfnConfig, TrainReport};
use crate::types::{EventSet, Interval, TimeSeries};
use crate::window::{OpSignal, WindowSpec};

/// Formats `x` with 17 significant digits, `%.17g` style: plain decimal for
/// moderate exponents, scientific otherwise, trailing zeros removed.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let m = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{m}e{exp}")
    }
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_iso(cell: &str) -> Option<f64> {
    let to_secs = |secs: i64, nanos: u32| secs as f64 + nanos as f64 * 1e-9;
    if let Ok(dt) = DateTime::parse_from_rfc3339(cell) {
        return Some(to_secs(dt.timestamp(), dt.timestamp_subsec_nanos()));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(cell, fmt) {
            let dt = dt.and_utc();
            return Some(to_secs(dt.timestamp(), dt.timestamp_subsec_nanos()));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum TimeFormat {
    Numeric,
    Iso,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || c.eq_ignore_ascii_case("nan") || c.eq_ignore_ascii_case("na") || c.eq_ignore_ascii_case("null")
}

/// Outcome of [`load_dataset`].
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub series: TimeSeries,
    pub dropped_rows: usize,
}

/// Reads a CSV whose first column is `time` (numeric seconds or ISO-8601,
/// detected once per file) and whose other columns are features. Rows with
/// empty or NaN cells are dropped and counted; any other unparseable cell,
/// disorder or duplicate timestamps are errors.
pub fn load_dataset(path: &Path) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.get(0).map(str::to_ascii_lowercase).as_deref() != Some("time") {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: "first column must be named `time`".into(),
        });
    }
    let feature_names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    if feature_names.is_empty() {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: "no feature columns".into(),
        });
    }
    let mut format = None;
    let mut timestamps = Vec::new();
    let mut values = Vec::new();
    let mut dropped = 0;
    let mut row_values = Vec::with_capacity(feature_names.len());
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(path, e))?;
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let time_cell = record.get(0).unwrap_or("");
        if record.iter().any(is_missing) {
            dropped += 1;
            continue;
        }
        let fmt = *format.get_or_insert_with(|| {
            if time_cell.parse::<f64>().is_ok() {
                TimeFormat::Numeric
            } else {
                TimeFormat::Iso
            }
        });
        let t = match fmt {
            TimeFormat::Numeric => time_cell.parse::<f64>().ok(),
            TimeFormat::Iso => parse_iso(time_cell),
        }
        .filter(|t| t.is_finite())
        .ok_or_else(|| parse_err(format!("unparseable time `{time_cell}`")))?;
        row_values.clear();
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| parse_err(format!("unparseable value `{cell}` in column `{}`", feature_names[j])))?;
            row_values.push(v);
        }
        if row_values.iter().any(|v| !v.is_finite()) {
            dropped += 1;
            continue;
        }
        timestamps.push(t);
        values.extend_from_slice(&row_values);
    }
    if dropped > 0 {
        log::warn!(
            "{}: dropped {dropped} row{} with missing values",
            path.display(),
            if dropped == 1 { "" } else { "s" }
        );
    }
    let series = TimeSeries::new(timestamps, values, feature_names).map_err(|e| match e {
        Error::InvalidData(m) => Error::Parse {
            path: path.into(),
            line: 0,
            message: m,
        },
        other => other,
    })?;
    Ok(LoadedDataset {
        series,
        dropped_rows: dropped,
    })
}

/// Reads events from a CSV with either one column (mid-times, giving point
/// events) or two columns (start, end).
pub fn load_events(path: &Path) -> Result<EventSet> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    let width = headers.len();
    if !(1..=2).contains(&width) {
        return Err(Error::Parse {
            path: path.into(),
            line: 1,
            message: format!("expected 1 (mid) or 2 (start, end) columns, found {width}"),
        });
    }
    let mut events = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| csv_err(path, e))?;
        let err = |message: String| Error::Parse {
            path: path.into(),
            line: row + 1,
            message: format!("row {row}: {message}"),
        };
        if record.len() != width {
            return Err(err(format!("has {} columns, header has {width}", record.len())));
        }
        let cells: Vec<f64> = record
            .iter()
            .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()).or_else(|| parse_iso(c)))
            .collect::<Option<_>>()
            .ok_or_else(|| err("unparseable time".into()))?;
        let (start, end) = if width == 1 {
            (cells[0], cells[0])
        } else {
            (cells[0], cells[1])
        };
        if start > end {
            return Err(err(format!("start {start} is after end {end}")));
        }
        events.push(Interval { start, end });
    }
    Ok(EventSet::new(events))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn series_csv(series: &TimeSeries) -> String {
    let mut out = String::from("time");
    for name in series.feature_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, t) in series.timestamps().iter().enumerate() {
        out.push_str(&fmt_f64(*t));
        for v in series.row(i) {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn events_csv(events: &EventSet) -> String {
    let mut out = String::from("start,end\n");
    for e in events {
        let _ = writeln!(out, "{},{}", fmt_f64(e.start), fmt_f64(e.end));
    }
    out
}

pub fn op_csv(signal: &OpSignal) -> String {
    let mut out = String::from("mid_time,value\n");
    for (t, v) in signal.mid_times.iter().zip(&signal.values) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*v));
    }
    out
}

pub fn losses_csv(reports: &[(String, TrainReport)]) -> String {
    let mut out = String::from("epoch,model_name,train_mse,val_mse\n");
    for (name, r) in reports {
        for (epoch, (t, v)) in r.train_loss.iter().zip(&r.val_loss).enumerate() {
            let _ = writeln!(out, "{epoch},{name},{},{}", fmt_f64(*t), fmt_f64(*v));
        }
    }
    out
}

pub fn histogram_csv(h: &Histogram) -> String {
    let mut out = String::from("bin_lower_edge,count\n");
    for (edge, count) in h.lower_edges.iter().zip(&h.counts) {
        let _ = writeln!(out, "{},{count}", fmt_f64(*edge));
    }
    out
}

pub fn write_series(path: &Path, series: &TimeSeries) -> Result<()> {
    write_file(path, &series_csv(series))
}

pub fn write_events(path: &Path, events: &EventSet) -> Result<()> {
    write_file(path, &events_csv(events))
}

pub fn write_op(path: &Path, signal: &OpSignal) -> Result<()> {
    write_file(path, &op_csv(signal))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.70,
            validation: 0.15,
            test: 0.15,
        }
    }
}

/// Everything a fit needs. Read from JSON; missing fields take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_path: Option<PathBuf>,
    pub events_path: Option<PathBuf>,
    pub width: usize,
    pub step: usize,
    pub width_events: f64,
    pub splits: SplitFractions,
    pub base_models: Vec<BaseModelConfig>,
    pub combiner: CombinerKind,
    pub meta_model: FfnConfig,
    pub grids: ExtractionGrids,
    /// Match tolerance in seconds; defaults to `width_events`.
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_path: None,
            events_path: None,
            width: 2,
            step: 1,
            width_events: 1.0,
            splits: SplitFractions::default(),
            base_models: default_stack(),
            combiner: CombinerKind::Average,
            meta_model: default_meta_config(),
            grids: ExtractionGrids::default(),
            tolerance: None,
            seed: 42,
            output_dir: PathBuf::from("eventseer-out"),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn window_spec(&self) -> Result<WindowSpec> {
        WindowSpec::new(self.width, self.step, self.width_events)
    }

    pub fn resolved_tolerance(&self) -> f64 {
        self.tolerance.unwrap_or(self.width_events)
    }

    /// Parameter checks; paths are checked separately by
    /// [`check_paths`](Self::check_paths) because a missing file is a data
    /// error, not a configuration error.
    pub fn validate(&self) -> Result<()> {
        self.window_spec()?;
        let s = &self.splits;
        for (name, v) in [("train", s.train), ("validation", s.validation), ("test", s.test)] {
            if !(v > 0.0) {
                return Err(Error::invalid(
                    format!("splits.{name}"),
                    format!("must be > 0, got {v}"),
                ));
            }
        }
        let total = s.train + s.validation + s.test;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "splits",
                format!("fractions must sum to 1, got {total}"),
            ));
        }
        if let Some(t) = self.tolerance {
            if !(t > 0.0) {
                return Err(Error::invalid("tolerance", format!("must be > 0, got {t}")));
            }
        }
        if self.base_models.is_empty() {
            return Err(Error::invalid("base_models", "need at least one base model"));
        }
        for b in &self.base_models {
            match b {
                BaseModelConfig::Ffn { config, instances, .. } => {
                    config.validate()?;
                    if *instances == 0 {
                        return Err(Error::invalid("instances", "must be >= 1"));
                    }
                }
                BaseModelConfig::Ridge { lambda, instances, .. } => {
                    if !(*lambda >= 0.0) {
                        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
                    }
                    if *instances == 0 {
                        return Err(Error::invalid("instances", "must be >= 1"));
                    }
                }
            }
        }
        self.meta_model.validate()?;
        self.grids.validate()?;
        if self.dataset_path.is_none() {
            return Err(Error::invalid("dataset", "a dataset path is required"));
        }
        if self.events_path.is_none() {
            return Err(Error::invalid("events", "an events path is required"));
        }
        Ok(())
    }

    pub fn check_paths(&self) -> Result<()> {
        for p in [&self.dataset_path, &self.events_path].into_iter().flatten() {
            if !p.is_file() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                ));
            }
        }
        Ok(())
    }
}

/// Contents of `metrics.json`: the test-split score plus the extraction
/// parameters chosen on the validation split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub split: String,
    #[serde(flatten)]
    pub score: ScoreReport,
    pub extraction: ExtractionParams,
    pub validation_f1: f64,
    pub sampling_period: f64,
}

/// Everything written by a successful fit.
pub struct FitArtifacts<'a> {
    pub config: &'a RunConfig,
    pub losses: &'a [(String, TrainReport)],
    pub op_true: &'a OpSignal,
    pub op_pred: &'a OpSignal,
    pub events_true: &'a EventSet,
    pub events_pred: &'a EventSet,
    pub metrics: &'a MetricsReport,
    pub histogram: &'a Histogram,
    pub stack: &'a StackedModel,
}

pub const OUTPUT_FORMAT_VERSION: u32 = 1;
pub const INCOMPLETE_MARKER: &str = ".incomplete";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub kind: String,
    pub format: String,
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contents: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub entries: Vec<ManifestEntry>,
}

fn entry(name: &str, format: &str) -> ManifestEntry {
    ManifestEntry {
        name: name.into(),
        kind: "file".into(),
        format: format.into(),
        format_version: OUTPUT_FORMAT_VERSION,
        contents: Vec::new(),
    }
}

fn json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes the fixed output layout into `dir`. A `.incomplete` marker exists
/// for the whole write and is removed only after `manifest.json` is in
/// place, so an interrupted write leaves the marker and no manifest.
pub fn write_outputs(dir: &Path, a: &FitArtifacts<'_>) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let marker = dir.join(INCOMPLETE_MARKER);
    write_file(&marker, "")?;
    let manifest_path = dir.join(MANIFEST_FILE);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }

    let mut entries = Vec::new();
    let mut put = |name: &str, format: &str, contents: String| -> Result<()> {
        write_file(&dir.join(name), &contents)?;
        entries.push(entry(name, format));
        Ok(())
    };
    put("config_echo.json", "json", json_pretty(a.config)?)?;
    put("losses.csv", "csv", losses_csv(a.losses))?;
    put("op_true.csv", "csv", op_csv(a.op_true))?;
    put("op_pred.csv", "csv", op_csv(a.op_pred))?;
    put("events_true.csv", "csv", events_csv(a.events_true))?;
    put("events_pred.csv", "csv", events_csv(a.events_pred))?;
    put("metrics.json", "json", json_pretty(a.metrics)?)?;
    put("deltat_hist.csv", "csv", histogram_csv(a.histogram))?;

    let models = dir.join("models");
    if models.exists() {
        fs::remove_dir_all(&models).map_err(|e| Error::io(&models, e))?;
    }
    let files = save_stack(a.stack, &models)?;
    entries.push(ManifestEntry {
        name: "models".into(),
        kind: "directory".into(),
        format: "eventseer-stack".into(),
        format_version: crate::regressor::MODEL_FORMAT_VERSION,
        contents: files,
    });

    let manifest = Manifest {
        format_version: OUTPUT_FORMAT_VERSION,
        entries,
    };
    write_file(&manifest_path, &json_pretty(&manifest)?)?;
    fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    Ok(manifest)
}
