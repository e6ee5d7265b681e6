//! Sliding windows and the overlap label attached to each of them.
//!
//! A window of `width` samples starting at sample `k` spans
//! `[t_k, t_k + width * period)`: every sample owns one full sampling period,
//! so even a one-sample window has positive duration. Irregular series use
//! the median period.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::par::Execution;
use crate::types::{sampling_period, EventSet, Interval, TimeSeries, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Samples per window.
    pub width: usize,
    /// Samples between consecutive window starts.
    pub step: usize,
    /// Duration, in seconds, every reference event is normalized to.
    pub width_events: f64,
}

impl WindowSpec {
    pub fn new(width: usize, step: usize, width_events: f64) -> Result<Self> {
        let spec = Self {
            width,
            step,
            width_events,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 1 {
            return Err(Error::invalid("width", "must be >= 1"));
        }
        if self.step < 1 {
            return Err(Error::invalid("step", "must be >= 1"));
        }
        if !(self.width_events > 0.0) || !self.width_events.is_finite() {
            return Err(Error::invalid(
                "width_events",
                format!("must be > 0, got {}", self.width_events),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub index: usize,
    pub first_sample: usize,
    pub span: Interval,
    pub mid_time: Timestamp,
}

/// Windows of one series together with their flattened feature rows
/// (sample-major, feature-minor: `[s0f0, s0f1, .., s1f0, ..]`).
#[derive(Debug, Clone)]
pub struct WindowSet {
    pub windows: Vec<Window>,
    pub features: Matrix,
    pub period: f64,
    pub irregular: bool,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    pub fn mid_times(&self) -> Vec<Timestamp> {
        self.windows.iter().map(|w| w.mid_time).collect()
    }

    pub fn spans(&self) -> Vec<Interval> {
        self.windows.iter().map(|w| w.span).collect()
    }
}

/// Per-window overlap scores aligned to window mid-times: the true labels or
/// a model's predictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OpSignal {
    pub mid_times: Vec<Timestamp>,
    pub values: Vec<f64>,
}

impl OpSignal {
    pub fn new(mid_times: Vec<Timestamp>, values: Vec<f64>) -> Self {
        assert_eq!(mid_times.len(), values.len(), "signal length mismatch");
        Self { mid_times, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> OpSignal {
        OpSignal {
            mid_times: self.mid_times[range.clone()].to_vec(),
            values: self.values[range].to_vec(),
        }
    }
}

/// Window start offsets `0, step, 2*step, ..` while `offset + width <= n`.
pub fn window_offsets(n: usize, width: usize, step: usize) -> Vec<usize> {
    if width == 0 || step == 0 || n < width {
        return Vec::new();
    }
    (0..=(n - width)).step_by(step).collect()
}

pub fn slide(series: &TimeSeries, spec: &WindowSpec) -> Result<WindowSet> {
    spec.validate()?;
    let n = series.len();
    if n < spec.width {
        return Err(Error::NoCompleteWindow {
            len: n,
            width: spec.width,
        });
    }
    let report = sampling_period(series)?;
    if report.irregular {
        log::warn!(
            "irregular sampling: max deviation {:.3}% from median period {}",
            report.max_relative_deviation * 100.0,
            report.period
        );
    }
    if spec.width_events < report.period {
        log::warn!(
            "width_events {} is shorter than one sampling period {}",
            spec.width_events,
            report.period
        );
    }
    let duration = spec.width as f64 * report.period;
    let ts = series.timestamps();
    let offsets = window_offsets(n, spec.width, spec.step);
    let cols = spec.width * series.n_features();
    let mut data = Vec::with_capacity(offsets.len() * cols);
    let windows = offsets
        .iter()
        .enumerate()
        .map(|(index, &first_sample)| {
            data.extend_from_slice(series.rows(first_sample, spec.width));
            let start = ts[first_sample];
            let span = Interval {
                start,
                end: start + duration,
            };
            Window {
                index,
                first_sample,
                span,
                mid_time: span.mid(),
            }
        })
        .collect::<Vec<_>>();
    let features = Matrix::new(windows.len(), cols, data);
    Ok(WindowSet {
        windows,
        features,
        period: report.period,
        irregular: report.irregular,
    })
}

/// Intersection over union of two intervals' durations, in `[0, 1]`.
///
/// Union is `|a| + |b| - |a ∩ b|`, the measure of the set union, so disjoint
/// intervals score 0. Two points score 1 if they coincide and 0 otherwise.
pub fn interval_overlap(a: &Interval, b: &Interval) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.duration() + b.duration() - inter;
    if union <= 0.0 {
        return if a.start == b.start && a.end == b.end { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

pub fn label_windows(windows: &WindowSet, events: &EventSet) -> OpSignal {
    label_windows_with(windows, events, Execution::default())
}

/// Max-over-events overlap for each window.
pub fn label_windows_with(windows: &WindowSet, events: &EventSet, exec: Execution) -> OpSignal {
    let spans = windows.spans();
    OpSignal::new(windows.mid_times(), label_spans(&spans, events, exec))
}

const LABEL_CHUNK: usize = 2048;

/// Max-over-events overlap for arbitrary spans.
///
/// When span starts and ends are both non-decreasing (always true for
/// [`slide`] output) this is an interval sweep over the start-sorted events,
/// costing `O(W + E log E + matches)`; otherwise it falls back to the double
/// loop. Both give identical values.
pub fn label_spans(spans: &[Interval], events: &EventSet, exec: Execution) -> Vec<f64> {
    if events.is_empty() {
        return vec![0.0; spans.len()];
    }
    let monotone = spans
        .windows(2)
        .all(|w| w[0].start <= w[1].start && w[0].end <= w[1].end);
    let events = events.events();
    if !monotone {
        return exec.map(spans, |s| {
            events.iter().map(|e| interval_overlap(s, e)).fold(0.0, f64::max)
        });
    }
    exec.flat_map_chunks(spans, LABEL_CHUNK, |_, chunk| sweep(chunk, events))
}

fn sweep(spans: &[Interval], events: &[Interval]) -> Vec<f64> {
    let mut out = Vec::with_capacity(spans.len());
    let mut next = 0;
    let mut active: Vec<Interval> = Vec::new();
    for span in spans {
        // events are start-sorted; admit everything starting by span.end
        while next < events.len() && events[next].start <= span.end {
            active.push(events[next]);
            next += 1;
        }
        // span.start never decreases, so an event ending before it is done
        active.retain(|e| e.end >= span.start);
        out.push(active.iter().map(|e| interval_overlap(span, e)).fold(0.0, f64::max));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(a: f64, b: f64) -> Interval {
        Interval::new(a, b).unwrap()
    }

    fn grid(n: usize, period: f64) -> TimeSeries {
        let ts = (0..n).map(|i| i as f64 * period).collect();
        let vals = (0..n * 2).map(|i| i as f64).collect();
        TimeSeries::new(ts, vals, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn window_counts() {
        let s = grid(5, 1.0);
        let w = slide(&s, &WindowSpec::new(2, 1, 1.0).unwrap()).unwrap();
        let firsts: Vec<_> = w.windows.iter().map(|w| w.first_sample).collect();
        assert_eq!(firsts, vec![0, 1, 2, 3]);
        let w = slide(&s, &WindowSpec::new(2, 2, 1.0).unwrap()).unwrap();
        let firsts: Vec<_> = w.windows.iter().map(|w| w.first_sample).collect();
        assert_eq!(firsts, vec![0, 2]);
    }

    #[test]
    fn window_offsets_match_enumeration() {
        // exhaustive: every offset with offset % step == 0 and offset + width <= n
        for n in 0..40 {
            for width in 1..12 {
                for step in 1..12 {
                    let brute: Vec<usize> = (0..n).filter(|o| o % step == 0 && o + width <= n).collect();
                    assert_eq!(window_offsets(n, width, step), brute, "n={n} w={width} s={step}");
                    if n >= width {
                        assert_eq!(brute.len(), (n - width) / step + 1);
                    }
                }
            }
        }
        assert_eq!(window_offsets(10, 3, 4), vec![0, 4]);
    }

    #[test]
    fn features_are_sample_major_and_spans_cover_periods() {
        let s = grid(4, 0.5);
        let w = slide(&s, &WindowSpec::new(2, 1, 1.0).unwrap()).unwrap();
        assert_eq!(w.features.row(1), &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(w.windows[1].span, iv(0.5, 1.5));
        assert_eq!(w.windows[1].mid_time, 1.0);
    }

    #[test]
    fn short_series_has_no_window() {
        let s = grid(3, 1.0);
        let err = slide(&s, &WindowSpec::new(4, 1, 1.0).unwrap()).unwrap_err();
        assert!(err.to_string().contains("no complete window"));
    }

    #[test]
    fn invalid_spec() {
        assert!(WindowSpec::new(0, 1, 1.0).is_err());
        assert!(WindowSpec::new(1, 0, 1.0).is_err());
        assert!(WindowSpec::new(1, 1, 0.0).is_err());
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(interval_overlap(&iv(0.0, 2.0), &iv(5.0, 6.0)), 0.0);
        assert_eq!(interval_overlap(&iv(0.0, 2.0), &iv(0.0, 2.0)), 1.0);
        assert_eq!(interval_overlap(&iv(0.0, 2.0), &iv(0.0, 1.0)), 0.5);
        assert!((interval_overlap(&iv(0.0, 2.0), &iv(1.0, 3.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(interval_overlap(&iv(3.0, 3.0), &iv(3.0, 3.0)), 1.0);
        assert_eq!(interval_overlap(&iv(3.0, 3.0), &iv(4.0, 4.0)), 0.0);
    }

    #[test]
    fn overlap_matches_monte_carlo() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (a, b) = (iv(0.0, 2.0), iv(1.0, 3.0));
        let n = 200_000;
        let (mut inter, mut uni) = (0usize, 0usize);
        for _ in 0..n {
            let x: f64 = rng.gen_range(0.0..3.0);
            let (ia, ib) = (x >= a.start && x < a.end, x >= b.start && x < b.end);
            inter += (ia && ib) as usize;
            uni += (ia || ib) as usize;
        }
        let mc = inter as f64 / uni as f64;
        assert!((mc - interval_overlap(&a, &b)).abs() < 5e-3, "mc = {mc}");
    }

    #[test]
    fn empty_events_label_zero() {
        let s = grid(10, 1.0);
        let w = slide(&s, &WindowSpec::new(2, 1, 2.0).unwrap()).unwrap();
        assert!(label_windows(&w, &EventSet::empty()).values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn identical_event_labels_one() {
        let s = grid(20, 1.0);
        let w = slide(&s, &WindowSpec::new(2, 2, 2.0).unwrap()).unwrap();
        let ev = EventSet::new(vec![iv(6.0, 8.0)]);
        let op = label_windows(&w, &ev);
        for (i, v) in op.values.iter().enumerate() {
            assert_eq!(*v, if i == 3 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn unsorted_spans_use_double_loop() {
        let spans = vec![iv(5.0, 7.0), iv(0.0, 2.0)];
        let ev = EventSet::new(vec![iv(0.0, 2.0)]);
        assert_eq!(label_spans(&spans, &ev, Execution::Sequential), vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn overlap_symmetric_and_shift_invariant(
            a0 in -100.0f64..100.0, da in 0.0f64..20.0,
            b0 in -100.0f64..100.0, db in 0.0f64..20.0,
            shift in -1e3f64..1e3,
        ) {
            let a = iv(a0, a0 + da);
            let b = iv(b0, b0 + db);
            let o = interval_overlap(&a, &b);
            prop_assert!((0.0..=1.0).contains(&o));
            prop_assert_eq!(o, interval_overlap(&b, &a));
            let sa = iv(a.start + shift, a.end + shift);
            let sb = iv(b.start + shift, b.end + shift);
            let so = interval_overlap(&sa, &sb);
            // shifting rounds the endpoints; compare relative to the magnitude of the times
            let scale = (a0.abs().max(b0.abs()) + shift.abs() + 20.0) / (da.max(db).max(1e-3));
            prop_assert!((o - so).abs() <= 1e-12 * scale.max(1.0), "{} vs {}", o, so);
        }
    }
}
