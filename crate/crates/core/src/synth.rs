//! Deterministic synthetic benchmark: Gaussian noise with smooth bumps at
//! known event positions.
//!
//! Every event adds a tapered-cosine bump (flat top over the central half,
//! cosine ramps over the outer quarters) of height `bump_amplitude *
//! noise_std` to the same seeded subset of `ceil(f / 2)` features; the other
//! features are pure noise.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{EventSet, Interval, TimeSeries};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_events: usize,
    /// Event duration, seconds.
    pub event_width: f64,
    /// Bump height in units of `noise_std`.
    pub bump_amplitude: f64,
    #[serde(default = "unit")]
    pub noise_std: f64,
    /// Minimum gap between one event's end and the next one's start, seconds.
    pub min_event_gap: f64,
    pub seed: u64,
    #[serde(default = "unit")]
    pub period: f64,
}

fn unit() -> f64 {
    1.0
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 20_000,
            n_features: 4,
            n_events: 40,
            event_width: 8.0,
            bump_amplitude: 3.0,
            noise_std: 1.0,
            min_event_gap: 50.0,
            seed: 42,
            period: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: String| Err(Error::invalid(name, reason));
        if self.n_samples < 2 {
            return bad("n_samples", format!("must be >= 2, got {}", self.n_samples));
        }
        if self.n_features == 0 {
            return bad("n_features", "must be >= 1".into());
        }
        if !(self.event_width > 0.0) || !self.event_width.is_finite() {
            return bad("event_width", format!("must be > 0, got {}", self.event_width));
        }
        if !(self.noise_std > 0.0) || !self.noise_std.is_finite() {
            return bad("noise_std", format!("must be > 0, got {}", self.noise_std));
        }
        if !(self.period > 0.0) || !self.period.is_finite() {
            return bad("period", format!("must be > 0, got {}", self.period));
        }
        if !(self.min_event_gap >= 0.0) || !self.min_event_gap.is_finite() {
            return bad("min_event_gap", format!("must be >= 0, got {}", self.min_event_gap));
        }
        if !self.bump_amplitude.is_finite() {
            return bad("bump_amplitude", "must be finite".into());
        }
        let needed = self.n_events as f64 * (self.event_width + self.min_event_gap);
        let available = self.n_samples as f64 * self.period;
        if needed > available {
            return bad(
                "n_events",
                format!(
                    "infeasible: n_events x (event_width + min_event_gap) = {needed} exceeds n_samples x period = {available}"
                ),
            );
        }
        if self.n_events > 0 && self.span_needed() > self.duration() {
            return bad(
                "n_events",
                format!(
                    "infeasible: events need {} s but the series spans only {} s",
                    self.span_needed(),
                    self.duration()
                ),
            );
        }
        Ok(())
    }

    fn duration(&self) -> f64 {
        (self.n_samples - 1) as f64 * self.period
    }

    fn span_needed(&self) -> f64 {
        self.n_events as f64 * self.event_width + self.n_events.saturating_sub(1) as f64 * self.min_event_gap
    }
}

const TAPER: f64 = 0.5;

/// Tapered-cosine profile on `u` in `[0, 1]`, 0 at both ends, 1 in the middle half.
fn bump_profile(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return 0.0;
    }
    let edge = u.min(1.0 - u);
    if edge < TAPER / 2.0 {
        0.5 * (1.0 - (2.0 * std::f64::consts::PI * edge / TAPER).cos())
    } else {
        1.0
    }
}

/// Indices of the features that carry the bumps.
pub fn bumped_features(config: &SynthConfig) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    pick_features(&mut rng, config.n_features)
}

fn pick_features(rng: &mut ChaCha8Rng, f: usize) -> Vec<usize> {
    let mut chosen = sample(rng, f, f.div_ceil(2)).into_vec();
    chosen.sort_unstable();
    chosen
}

pub fn generate(config: &SynthConfig) -> Result<(TimeSeries, EventSet)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let features = pick_features(&mut rng, config.n_features);

    // Events sit on the sample grid: choose n distinct slots among
    // slack + n, then the k-th event starts k * (width + gap) later than
    // its slot, which enforces the gap exactly.
    let mut events = Vec::with_capacity(config.n_events);
    if config.n_events > 0 {
        let slack = ((config.duration() - config.span_needed()) / config.period + 1e-9).floor() as usize;
        let mut slots = sample(&mut rng, slack + config.n_events, config.n_events).into_vec();
        slots.sort_unstable();
        for (k, slot) in slots.into_iter().enumerate() {
            let start = (slot - k) as f64 * config.period + k as f64 * (config.event_width + config.min_event_gap);
            events.push(Interval {
                start,
                end: start + config.event_width,
            });
        }
    }

    let f = config.n_features;
    let n = config.n_samples;
    let normal = Normal::new(0.0, config.noise_std).expect("validated noise_std");
    let mut values: Vec<f64> = (0..n * f).map(|_| normal.sample(&mut rng)).collect();
    let timestamps: Vec<f64> = (0..n).map(|i| i as f64 * config.period).collect();
    let height = config.bump_amplitude * config.noise_std;
    for e in &events {
        let first = (e.start / config.period).floor().max(0.0) as usize;
        let last = ((e.end / config.period).ceil() as usize).min(n - 1);
        for i in first..=last {
            let p = bump_profile((timestamps[i] - e.start) / config.event_width);
            if p == 0.0 {
                continue;
            }
            for &j in &features {
                values[i * f + j] += height * p;
            }
        }
    }
    let names = (0..f).map(|j| format!("x{j}")).collect();
    let series = TimeSeries::new(timestamps, values, names)?;
    Ok((series, EventSet::new(events)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_events_means_pure_noise() {
        let cfg = SynthConfig {
            n_samples: 500,
            n_events: 0,
            ..SynthConfig::default()
        };
        let (s, e) = generate(&cfg).unwrap();
        assert!(e.is_empty());
        assert_eq!(s.len(), 500);
        let mean = s.values().iter().sum::<f64>() / s.values().len() as f64;
        assert!(mean.abs() < 0.1);
    }

    #[test]
    fn reference_config_respects_constraints() {
        let cfg = SynthConfig::default();
        let (s, e) = generate(&cfg).unwrap();
        assert_eq!(e.len(), 40);
        let last = *s.timestamps().last().unwrap();
        for ev in e.iter() {
            assert_eq!(ev.duration(), 8.0);
            assert!(ev.start >= 0.0 && ev.end <= last);
        }
        for w in e.events().windows(2) {
            assert!(w[1].start - w[0].end >= 50.0, "{w:?}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig {
            n_samples: 2000,
            n_events: 5,
            ..SynthConfig::default()
        };
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = SynthConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(generate(&cfg).unwrap().0, generate(&other).unwrap().0);
    }

    #[test]
    fn infeasible_config_names_the_bound() {
        let cfg = SynthConfig {
            n_samples: 100,
            n_events: 3,
            event_width: 10.0,
            min_event_gap: 30.0,
            ..SynthConfig::default()
        };
        let err = generate(&cfg).unwrap_err();
        assert!(
            err.to_string().contains("n_events x (event_width + min_event_gap)"),
            "{err}"
        );
    }

    #[test]
    fn tight_packing_is_feasible() {
        // 3 events of 10 s with 10 s gaps need 50 s; the series spans 59 s.
        let cfg = SynthConfig {
            n_samples: 60,
            n_events: 3,
            event_width: 10.0,
            min_event_gap: 10.0,
            ..SynthConfig::default()
        };
        let (_, e) = generate(&cfg).unwrap();
        assert_eq!(e.len(), 3);
    }

    #[test]
    fn bumps_stand_out_of_the_noise() {
        let cfg = SynthConfig::default();
        let (s, e) = generate(&cfg).unwrap();
        let f = s.n_features();
        for j in bumped_features(&cfg) {
            let (mut inside, mut n_in, mut outside, mut n_out) = (0.0, 0, 0.0, 0);
            for (i, t) in s.timestamps().iter().enumerate() {
                let v = s.values()[i * f + j];
                if e.iter().any(|ev| *t >= ev.start && *t <= ev.end) {
                    inside += v;
                    n_in += 1;
                } else {
                    outside += v;
                    n_out += 1;
                }
            }
            let gap = inside / n_in as f64 - outside / n_out as f64;
            assert!(gap >= cfg.bump_amplitude / 2.0 * cfg.noise_std, "feature {j}: {gap}");
        }
    }

    #[test]
    fn profile_shape() {
        assert_eq!(bump_profile(0.0), 0.0);
        assert_eq!(bump_profile(0.5), 1.0);
        assert!((bump_profile(0.125) - 0.5).abs() < 1e-12);
        assert!(bump_profile(1.0).abs() < 1e-12);
        assert_eq!(bump_profile(1.5), 0.0);
    }
}
