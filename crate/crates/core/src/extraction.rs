//! From a predicted overlap signal to events: Gaussian smoothing,
//! thresholded peak picking, fixed-width event reconstruction, and the
//! F1-maximizing grid search over `(kernel_size, sigma, threshold)`.
//!
//! `sigma` and `kernel_size` are measured in window steps, the natural axis
//! of the signal; one step is `step * period` seconds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{match_events, score};
use crate::par::Execution;
use crate::types::{EventSet, Interval};
use crate::window::OpSignal;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractionParams {
    pub kernel_size: usize,
    pub sigma: f64,
    pub peak_threshold: f64,
}

impl ExtractionParams {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(
                "kernel_size",
                format!("must be odd and >= 1, got {}", self.kernel_size),
            ));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("must be > 0, got {}", self.sigma)));
        }
        if !(self.peak_threshold > 0.0 && self.peak_threshold < 1.0) {
            return Err(Error::invalid(
                "peak_threshold",
                format!("must lie in (0, 1), got {}", self.peak_threshold),
            ));
        }
        Ok(())
    }
}

/// Normalized Gaussian taps `exp(-k^2 / (2 sigma^2))` for
/// `k = -(size-1)/2 ..= (size-1)/2`, summing to 1 after truncation.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(Error::invalid(
            "kernel_size",
            format!("must be odd and >= 1, got {size}"),
        ));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid("sigma", format!("must be > 0, got {sigma}")));
    }
    let half = (size / 2) as isize;
    let raw: Vec<f64> = (-half..=half)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|v| v / total).collect())
}

/// Folds an out-of-range index back into `0..n` by half-sample symmetric
/// reflection (`.. b a | a b c .. | c b ..`), repeating as often as needed.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

/// Same-length convolution with a symmetric kernel and reflect padding.
/// A constant signal is a fixed point and outputs stay within the input's
/// range.
pub fn smooth(signal: &OpSignal, kernel: &[f64]) -> OpSignal {
    OpSignal {
        mid_times: signal.mid_times.clone(),
        values: smooth_values(&signal.values, kernel),
    }
}

pub fn smooth_values(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len();
    if kernel.len() == 1 || n == 0 {
        return values.to_vec();
    }
    let half = (kernel.len() / 2) as isize;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(*v), hi.max(*v))
    });
    (0..n as isize)
        .map(|i| {
            let mut acc = 0.0;
            for (j, w) in kernel.iter().enumerate() {
                let k = i + j as isize - half;
                let idx = if k >= 0 && (k as usize) < n {
                    k as usize
                } else {
                    reflect(k, n)
                };
                acc += w * values[idx];
            }
            // convex combination; clamp away the last-ulp rounding
            acc.clamp(lo, hi)
        })
        .collect()
}

/// Indices `i` with `v[i] >= threshold`, `v[i] > v[i-1]` and
/// `v[i] >= v[i+1]`; comparisons against missing neighbours are skipped at
/// the boundaries. On a plateau only its first index qualifies.
pub fn find_peaks(values: &[f64], threshold: f64) -> Vec<usize> {
    let n = values.len();
    (0..n)
        .filter(|&i| {
            let v = values[i];
            v >= threshold && (i == 0 || v > values[i - 1]) && (i + 1 == n || v >= values[i + 1])
        })
        .collect()
}

/// One event of duration `width_events` centred on each peak's mid-time.
/// Overlapping events are kept as they are.
pub fn reconstruct_events(peaks: &[usize], signal: &OpSignal, width_events: f64) -> EventSet {
    EventSet::new(
        peaks
            .iter()
            .map(|&p| Interval::centered(signal.mid_times[p], width_events))
            .collect(),
    )
}

/// Smooth, pick peaks and rebuild events with one parameter triple.
pub fn extract_events(signal: &OpSignal, params: &ExtractionParams, width_events: f64) -> Result<EventSet> {
    let kernel = gaussian_kernel(params.kernel_size, params.sigma)?;
    let smoothed = smooth(signal, &kernel);
    let peaks = find_peaks(&smoothed.values, params.peak_threshold);
    Ok(reconstruct_events(&peaks, &smoothed, width_events))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionGrids {
    pub kernel_size: Vec<usize>,
    pub sigma: Vec<f64>,
    pub threshold: Vec<f64>,
}

impl Default for ExtractionGrids {
    fn default() -> Self {
        Self {
            kernel_size: vec![1, 3, 5, 7, 9],
            sigma: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
            threshold: (1..=19).map(|k| k as f64 / 20.0).collect(),
        }
    }
}

impl ExtractionGrids {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size.is_empty() || self.sigma.is_empty() || self.threshold.is_empty() {
            return Err(Error::invalid("grids", "every grid needs at least one value"));
        }
        for &k in &self.kernel_size {
            for &s in &self.sigma {
                for &t in &self.threshold {
                    ExtractionParams {
                        kernel_size: k,
                        sigma: s,
                        peak_threshold: t,
                    }
                    .validate()?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub params: ExtractionParams,
    pub best_f1: f64,
    pub candidates: usize,
}

/// F1 of one parameter triple against `truth`.
pub fn evaluate_params(
    signal: &OpSignal,
    truth: &EventSet,
    params: &ExtractionParams,
    width_events: f64,
    tolerance: f64,
) -> Result<f64> {
    let predicted = extract_events(signal, params, width_events)?;
    Ok(score(&match_events(&predicted, truth, tolerance)).f1)
}

pub fn optimize_extraction(
    val_predictions: &OpSignal,
    truth: &EventSet,
    width_events: f64,
    tolerance: f64,
    grids: &ExtractionGrids,
) -> Result<OptimizationReport> {
    optimize_extraction_with(
        val_predictions,
        truth,
        width_events,
        tolerance,
        grids,
        Execution::default(),
    )
}

/// Exhaustive grid search. The winner has the highest F1; ties go to the
/// smaller sigma, then the smaller kernel, then the lower threshold. The
/// result does not depend on evaluation order.
pub fn optimize_extraction_with(
    val_predictions: &OpSignal,
    truth: &EventSet,
    width_events: f64,
    tolerance: f64,
    grids: &ExtractionGrids,
    exec: Execution,
) -> Result<OptimizationReport> {
    if truth.is_empty() {
        return Err(Error::EmptyReference);
    }
    grids.validate()?;
    // each (kernel, sigma) smoothing is shared by every threshold
    let shapes: Vec<(usize, f64)> = grids
        .kernel_size
        .iter()
        .flat_map(|&k| grids.sigma.iter().map(move |&s| (k, s)))
        .collect();
    let scored: Vec<Vec<(ExtractionParams, f64)>> = exec.map(&shapes, |&(k, s)| {
        let kernel = gaussian_kernel(k, s).expect("validated grid");
        let smoothed = smooth(val_predictions, &kernel);
        grids
            .threshold
            .iter()
            .map(|&t| {
                let peaks = find_peaks(&smoothed.values, t);
                let predicted = reconstruct_events(&peaks, &smoothed, width_events);
                let f1 = score(&match_events(&predicted, truth, tolerance)).f1;
                (
                    ExtractionParams {
                        kernel_size: k,
                        sigma: s,
                        peak_threshold: t,
                    },
                    f1,
                )
            })
            .collect()
    });
    let candidates: Vec<(ExtractionParams, f64)> = scored.into_iter().flatten().collect();
    let n = candidates.len();
    let (params, best_f1) = candidates
        .into_iter()
        .min_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then(a.0.sigma.total_cmp(&b.0.sigma))
                .then(a.0.kernel_size.cmp(&b.0.kernel_size))
                .then(a.0.peak_threshold.total_cmp(&b.0.peak_threshold))
        })
        .expect("non-empty grid");
    Ok(OptimizationReport {
        params,
        best_f1,
        candidates: n,
    })
}
