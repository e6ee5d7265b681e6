//! End-to-end fit and detect.
//!
//! Windows are split chronologically into train, validation and test. Base
//! models learn on train; the combiner and the extraction parameters are
//! tuned on validation; the reported score comes from the test windows
//! only. Extraction always runs over the whole predicted signal, so
//! `detect` on the training dataset reproduces the events of `fit`.

use std::ops::Range;
use std::path::Path;

use crate::ensemble::{train_stack, Split, StackedModel};
use crate::error::{Error, Result};
use crate::extraction::{extract_events, optimize_extraction_with, OptimizationReport};
use crate::io::{load_dataset, load_events, FitArtifacts, MetricsReport, RunConfig, SplitFractions};
use crate::metrics::{delta_t_histogram, match_events, score, Histogram, MatchResult};
use crate::par::Execution;
use crate::regressor::TrainReport;
use crate::types::{EventSet, TimeSeries};
use crate::window::{label_windows_with, slide, OpSignal, WindowSet};

/// Window index ranges of the three chronological splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub validation: Range<usize>,
    pub test: Range<usize>,
}

pub fn split_ranges(n_windows: usize, fractions: &SplitFractions) -> Result<SplitRanges> {
    let n_train = (n_windows as f64 * fractions.train).floor() as usize;
    let n_val = (n_windows as f64 * fractions.validation).floor() as usize;
    let n_test = n_windows.saturating_sub(n_train + n_val);
    if n_train == 0 || n_val < 2 || n_test == 0 {
        return Err(Error::InvalidData(format!(
            "{n_windows} windows are too few to split into train/validation/test ({n_train}/{n_val}/{n_test})"
        )));
    }
    Ok(SplitRanges {
        train: 0..n_train,
        validation: n_train..n_train + n_val,
        test: n_train + n_val..n_windows,
    })
}

/// Reference events whose mid-time lies between the first and last window
/// mid-time of `range`.
fn events_in(events: &EventSet, mids: &[f64], range: &Range<usize>) -> EventSet {
    events.with_mid_in(mids[range.start], mids[range.end - 1])
}

pub struct FitOutcome {
    pub stack: StackedModel,
    pub losses: Vec<(String, TrainReport)>,
    pub windows: WindowSet,
    pub splits: SplitRanges,
    pub op_true: OpSignal,
    pub op_pred: OpSignal,
    /// Reference events normalized to `width_events`.
    pub events_true: EventSet,
    pub events_pred: EventSet,
    pub optimization: OptimizationReport,
    pub test_match: MatchResult,
    pub metrics: MetricsReport,
    pub histogram: Histogram,
}

impl FitOutcome {
    pub fn artifacts<'a>(&'a self, config: &'a RunConfig) -> FitArtifacts<'a> {
        FitArtifacts {
            config,
            losses: &self.losses,
            op_true: &self.op_true,
            op_pred: &self.op_pred,
            events_true: &self.events_true,
            events_pred: &self.events_pred,
            metrics: &self.metrics,
            histogram: &self.histogram,
            stack: &self.stack,
        }
    }
}

/// Loads the configured files and runs [`fit_series`].
pub fn fit(config: &RunConfig, exec: Execution) -> Result<FitOutcome> {
    config.validate()?;
    config.check_paths()?;
    let dataset_path = config.dataset_path.as_deref().expect("validated");
    let events_path = config.events_path.as_deref().expect("validated");
    let series = load_dataset(dataset_path)?.series;
    let events = load_events(events_path)?;
    fit_series(&series, &events, config, exec)
}

pub fn fit_series(series: &TimeSeries, events: &EventSet, config: &RunConfig, exec: Execution) -> Result<FitOutcome> {
    let spec = config.window_spec()?;
    let tolerance = config.resolved_tolerance();
    let windows = slide(series, &spec)?;
    let events_true = events.to_fixed_width(spec.width_events)?;
    let op_true = label_windows_with(&windows, &events_true, exec);
    let splits = split_ranges(windows.len(), &config.splits)?;
    let part = |r: &Range<usize>| Split {
        rows: windows.features.slice_rows(r.clone()),
        targets: op_true.values[r.clone()].to_vec(),
    };
    let (mut stack, losses) = train_stack(
        &part(&splits.train),
        &part(&splits.validation),
        &config.base_models,
        config.combiner,
        &config.meta_model,
        spec,
        config.seed,
        exec,
    )?;

    let op_pred = OpSignal::new(op_true.mid_times.clone(), stack.predict(&windows.features)?);
    let mids = &op_true.mid_times;
    let val_truth = events_in(&events_true, mids, &splits.validation);
    let optimization = optimize_extraction_with(
        &op_pred.slice(splits.validation.clone()),
        &val_truth,
        spec.width_events,
        tolerance,
        &config.grids,
        exec,
    )?;
    log::info!(
        "extraction: kernel {} sigma {} threshold {} (validation F1 {:.4})",
        optimization.params.kernel_size,
        optimization.params.sigma,
        optimization.params.peak_threshold,
        optimization.best_f1
    );
    stack.extraction = Some(optimization.params);
    let events_pred = extract_events(&op_pred, &optimization.params, spec.width_events)?;

    let test_match = match_events(
        &events_in(&events_pred, mids, &splits.test),
        &events_in(&events_true, mids, &splits.test),
        tolerance,
    );
    let histogram = delta_t_histogram(&test_match, spec.step as f64 * windows.period);
    let metrics = MetricsReport {
        split: "test".into(),
        score: score(&test_match),
        extraction: optimization.params,
        validation_f1: optimization.best_f1,
        sampling_period: windows.period,
    };
    Ok(FitOutcome {
        stack,
        losses,
        windows,
        splits,
        op_true,
        op_pred,
        events_true,
        events_pred,
        optimization,
        test_match,
        metrics,
        histogram,
    })
}

/// Applies a fitted stack to a new series: predicted overlap signal and
/// extracted events.
pub fn detect(stack: &StackedModel, series: &TimeSeries) -> Result<(OpSignal, EventSet)> {
    let params = stack
        .extraction
        .ok_or_else(|| Error::Format("model has no extraction parameters".into()))?;
    let windows = slide(series, &stack.spec)?;
    if windows.features.cols() != stack.n_inputs() {
        return Err(Error::DimensionMismatch {
            expected: stack.n_inputs(),
            found: windows.features.cols(),
        });
    }
    let op_pred = OpSignal::new(windows.mid_times(), stack.predict(&windows.features)?);
    let events = extract_events(&op_pred, &params, stack.spec.width_events)?;
    Ok((op_pred, events))
}

pub fn detect_file(model_dir: &Path, dataset: &Path) -> Result<(OpSignal, EventSet)> {
    let stack = crate::ensemble::load_stack(model_dir)?;
    let series = load_dataset(dataset)?.series;
    detect(&stack, &series)
}
