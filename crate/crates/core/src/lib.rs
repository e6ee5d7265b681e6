//! Event detection in multivariate time series.
//!
//! Sliding windows are labelled with their best interval overlap against the
//! reference events, a stacked ensemble of small regressors learns that
//! score, and events are recovered at the peaks of the smoothed prediction.

pub mod ensemble;
pub mod error;
pub mod extraction;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod regressor;
pub mod synth;
pub mod types;
pub mod window;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
pub use par::Execution;
pub use types::{sampling_period, to_fixed_width_events, EventSet, Interval, SamplingReport, TimeSeries, Timestamp};
pub use window::{interval_overlap, label_windows, slide, OpSignal, Window, WindowSet, WindowSpec};
