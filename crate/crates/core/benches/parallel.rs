//! Sequential versus rayon execution of the two data-parallel hot paths:
//! window labeling and the extraction grid search.
//!
//!     cargo bench -p eventseer --bench parallel
//!
//! Built with `--no-default-features` both variants run sequentially, which
//! makes the fallback cost visible.

use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use eventseer::extraction::{optimize_extraction_with, ExtractionGrids};
use eventseer::synth::{generate, SynthConfig};
use eventseer::window::{label_windows_with, slide, OpSignal, WindowSpec};
use eventseer::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn labeling(c: &mut Criterion) {
    let mut group = c.benchmark_group("label_windows");
    for n in [20_000, 200_000] {
        let cfg = SynthConfig {
            n_samples: n,
            n_features: 1,
            n_events: n / 200,
            ..SynthConfig::default()
        };
        let (series, events) = generate(&cfg).unwrap();
        let windows = slide(&series, &WindowSpec::new(8, 1, 8.0).unwrap()).unwrap();
        let events = events.to_fixed_width(8.0).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| label_windows_with(black_box(&windows), black_box(&events), exec))
            });
        }
    }
    group.finish();
}

fn grid_search(c: &mut Criterion) {
    let cfg = SynthConfig {
        n_samples: 20_000,
        n_features: 1,
        ..SynthConfig::default()
    };
    let (series, events) = generate(&cfg).unwrap();
    let windows = slide(&series, &WindowSpec::new(8, 1, 8.0).unwrap()).unwrap();
    let events = events.to_fixed_width(8.0).unwrap();
    let truth = label_windows_with(&windows, &events, Execution::Parallel);
    // a noisy stand-in for model predictions
    let noisy: Vec<f64> = truth
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| (v + 0.15 * ((i as f64 * 0.7).sin())).clamp(0.0, 1.0))
        .collect();
    let signal = OpSignal::new(truth.mid_times.clone(), noisy);
    let grids = ExtractionGrids::default();

    let mut group = c.benchmark_group("optimize_extraction");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| optimize_extraction_with(black_box(&signal), &events, 8.0, 8.0, &grids, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, labeling, grid_search);
criterion_main!(benches);
