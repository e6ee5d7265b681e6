//! Time, interval, series and event representations shared by every stage.
//!
//! All times are seconds as `f64` on one common axis: epoch seconds for
//! wall-clock data, `index * period` for synthetic data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Seconds on the common time axis.
pub type Timestamp = f64;

/// Closed time interval. Only its duration is ever used, so the closedness
/// of the edges is not observable downstream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl Interval {
    pub fn new(start: Timestamp, end: Timestamp) -> Result<Self> {
        if !start.is_finite() || !end.is_finite() {
            return Err(Error::InvalidData(format!(
                "interval bounds must be finite, got ({start}, {end})"
            )));
        }
        if start > end {
            return Err(Error::InvalidData(format!("interval start {start} is after end {end}")));
        }
        Ok(Self { start, end })
    }

    /// Interval of the given duration centred on `mid`.
    pub fn centered(mid: Timestamp, width: f64) -> Self {
        Self {
            start: mid - width / 2.0,
            end: mid + width / 2.0,
        }
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }

    pub fn mid(&self) -> Timestamp {
        (self.start + self.end) / 2.0
    }
}

/// Timestamped `f`-dimensional observations; row-major values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    timestamps: Vec<Timestamp>,
    values: Vec<f64>,
    feature_names: Vec<String>,
}

impl TimeSeries {
    /// Builds a series from row-major `values` (`timestamps.len()` rows of
    /// `feature_names.len()` columns). Timestamps must be strictly increasing
    /// and every value finite; disorder is rejected, never silently sorted.
    pub fn new(timestamps: Vec<Timestamp>, values: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        let f = feature_names.len();
        if f == 0 {
            return Err(Error::InvalidData("series needs at least one feature column".into()));
        }
        if values.len() != timestamps.len() * f {
            return Err(Error::InvalidData(format!(
                "{} values do not fill {} rows of {} features",
                values.len(),
                timestamps.len(),
                f
            )));
        }
        if let Some(t) = timestamps.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite timestamp {t}")));
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            let kind = if timestamps[i + 1] == timestamps[i] {
                "duplicate"
            } else {
                "decreasing"
            };
            return Err(Error::InvalidData(format!(
                "{kind} timestamp at row {}: {} after {}",
                i + 1,
                timestamps[i + 1],
                timestamps[i]
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("series contains non-finite values".into()));
        }
        Ok(Self {
            timestamps,
            values,
            feature_names,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let f = self.n_features();
        &self.values[i * f..(i + 1) * f]
    }

    /// Contiguous rows `first..first + count`, flattened sample-major.
    pub fn rows(&self, first: usize, count: usize) -> &[f64] {
        let f = self.n_features();
        &self.values[first * f..(first + count) * f]
    }
}

/// Result of [`sampling_period`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingReport {
    /// Median gap between consecutive timestamps.
    pub period: f64,
    /// Largest `|gap - period| / period` over all gaps.
    pub max_relative_deviation: f64,
    /// Some gap deviates from the median by more than 1%.
    pub irregular: bool,
}

const IRREGULARITY_TOLERANCE: f64 = 0.01;

pub fn sampling_period(series: &TimeSeries) -> Result<SamplingReport> {
    sampling_period_of(series.timestamps())
}

pub(crate) fn sampling_period_of(timestamps: &[Timestamp]) -> Result<SamplingReport> {
    if timestamps.len() < 2 {
        return Err(Error::SeriesTooShort {
            needed: 2,
            got: timestamps.len(),
        });
    }
    let mut gaps: Vec<f64> = timestamps.windows(2).map(|w| w[1] - w[0]).collect();
    if gaps.iter().any(|g| *g <= 0.0) {
        return Err(Error::InvalidData("timestamps are not strictly increasing".into()));
    }
    let original = gaps.clone();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    let period = if n % 2 == 1 {
        gaps[n / 2]
    } else {
        (gaps[n / 2 - 1] + gaps[n / 2]) / 2.0
    };
    let max_relative_deviation = original.iter().map(|g| (g - period).abs() / period).fold(0.0, f64::max);
    Ok(SamplingReport {
        period,
        max_relative_deviation,
        irregular: max_relative_deviation > IRREGULARITY_TOLERANCE,
    })
}

/// Reference or predicted events, kept sorted by `(start, end)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventSet {
    events: Vec<Interval>,
}

impl EventSet {
    pub fn new(mut events: Vec<Interval>) -> Self {
        events.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        Self { events }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Interval] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.events.iter()
    }

    /// Events whose mid-time lies in `[lo, hi]`.
    pub fn with_mid_in(&self, lo: Timestamp, hi: Timestamp) -> EventSet {
        EventSet {
            events: self
                .events
                .iter()
                .filter(|e| (lo..=hi).contains(&e.mid()))
                .copied()
                .collect(),
        }
    }

    /// Replaces every event by the interval of duration `width_events`
    /// centred on its midpoint. The input width is discarded, so point
    /// events and longer intervals are treated alike.
    pub fn to_fixed_width(&self, width_events: f64) -> Result<EventSet> {
        if !(width_events > 0.0) || !width_events.is_finite() {
            return Err(Error::invalid(
                "width_events",
                format!("must be > 0, got {width_events}"),
            ));
        }
        Ok(EventSet::new(
            self.events
                .iter()
                .map(|e| Interval::centered(e.mid(), width_events))
                .collect(),
        ))
    }
}

impl<'a> IntoIterator for &'a EventSet {
    type Item = &'a Interval;
    type IntoIter = std::slice::Iter<'a, Interval>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

pub fn to_fixed_width_events(raw: &EventSet, width_events: f64) -> Result<EventSet> {
    raw.to_fixed_width(width_events)
}
