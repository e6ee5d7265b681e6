use std::fs;

use eventseer::ensemble::{load_stack, BaseModelConfig, CombinerKind};
use eventseer::io::{self, RunConfig, INCOMPLETE_MARKER, MANIFEST_FILE};
use eventseer::pipeline::{detect, fit_series};
use eventseer::regressor::FfnConfig;
use eventseer::synth::{generate, SynthConfig};
use eventseer::{Execution, TimeSeries};

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_samples: 4000,
        n_features: 3,
        n_events: 30,
        event_width: 6.0,
        bump_amplitude: 4.0,
        min_event_gap: 40.0,
        seed,
        ..SynthConfig::default()
    }
}

fn quick_config(combiner: CombinerKind) -> RunConfig {
    let ffn = |hidden: Vec<usize>| BaseModelConfig::Ffn {
        name: None,
        instances: 1,
        config: FfnConfig {
            hidden_layers: hidden,
            epochs: 60,
            batch_size: 64,
            learning_rate: 3e-3,
            ..FfnConfig::default()
        },
    };
    RunConfig {
        width: 6,
        step: 1,
        width_events: 6.0,
        base_models: vec![ffn(vec![10]), BaseModelConfig::ridge(1.0)],
        combiner,
        seed: 7,
        ..RunConfig::default()
    }
}

#[test]
fn fit_finds_synthetic_events_and_detect_reproduces_them() {
    let (series, events) = generate(&small_synth(3)).unwrap();
    let cfg = quick_config(CombinerKind::Average);
    let out = fit_series(&series, &events, &cfg, Execution::Parallel).unwrap();
    assert!(out.metrics.score.f1 >= 0.8, "{:?}", out.metrics);
    assert_eq!(out.op_pred.len(), out.windows.len());
    assert!(out.op_pred.values.iter().all(|v| (0.0..=1.0).contains(v)));

    let dir = tempfile::tempdir().unwrap();
    let manifest = io::write_outputs(dir.path(), &out.artifacts(&cfg)).unwrap();
    assert_eq!(manifest.entries.len(), 9);
    assert!(!dir.path().join(INCOMPLETE_MARKER).exists());
    assert!(dir.path().join(MANIFEST_FILE).exists());

    let stack = load_stack(&dir.path().join("models")).unwrap();
    let (op, detected) = detect(&stack, &series).unwrap();
    assert_eq!(
        io::op_csv(&op),
        fs::read_to_string(dir.path().join("op_pred.csv")).unwrap()
    );
    assert_eq!(
        io::events_csv(&detected),
        fs::read_to_string(dir.path().join("events_pred.csv")).unwrap()
    );
}

#[test]
fn sequential_and_parallel_fits_agree() {
    let (series, events) = generate(&small_synth(5)).unwrap();
    let cfg = quick_config(CombinerKind::Average);
    let a = fit_series(&series, &events, &cfg, Execution::Sequential).unwrap();
    let b = fit_series(&series, &events, &cfg, Execution::Parallel).unwrap();
    assert_eq!(a.op_pred, b.op_pred);
    assert_eq!(a.events_pred, b.events_pred);
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn meta_combiner_round_trips() {
    let (series, events) = generate(&small_synth(11)).unwrap();
    let cfg = quick_config(CombinerKind::MetaFfn);
    let out = fit_series(&series, &events, &cfg, Execution::Parallel).unwrap();
    assert_eq!(out.losses.last().unwrap().0, "meta");
    let dir = tempfile::tempdir().unwrap();
    io::write_outputs(dir.path(), &out.artifacts(&cfg)).unwrap();
    let stack = load_stack(&dir.path().join("models")).unwrap();
    assert_eq!(stack, out.stack);
    assert_eq!(detect(&stack, &series).unwrap().0, out.op_pred);
}

#[test]
fn detect_rejects_wrong_feature_count() {
    let (series, events) = generate(&small_synth(3)).unwrap();
    let out = fit_series(
        &series,
        &events,
        &quick_config(CombinerKind::Average),
        Execution::Parallel,
    )
    .unwrap();
    let n = 200;
    let narrow = TimeSeries::new(
        (0..n).map(|i| i as f64).collect(),
        vec![0.0; n * 2],
        vec!["a".into(), "b".into()],
    )
    .unwrap();
    let err = detect(&out.stack, &narrow).unwrap_err();
    assert!(err.to_string().contains("dimension"), "{err}");
}

#[test]
fn losses_file_has_one_row_per_epoch_and_model() {
    let (series, events) = generate(&small_synth(3)).unwrap();
    let out = fit_series(
        &series,
        &events,
        &quick_config(CombinerKind::Average),
        Execution::Parallel,
    )
    .unwrap();
    let csv = io::losses_csv(&out.losses);
    let rows = csv.lines().count() - 1;
    let expected: usize = out.losses.iter().map(|(_, r)| r.train_loss.len()).sum();
    assert_eq!(rows, expected);
    assert!(csv.lines().any(|l| l.contains(",ridge_1,")));
}

#[test]
fn interrupted_write_leaves_marker_and_no_manifest() {
    let (series, events) = generate(&small_synth(3)).unwrap();
    let cfg = quick_config(CombinerKind::Average);
    let out = fit_series(&series, &events, &cfg, Execution::Parallel).unwrap();
    let dir = tempfile::tempdir().unwrap();
    io::write_outputs(dir.path(), &out.artifacts(&cfg)).unwrap();
    // a plain file where the model directory belongs makes the last step fail
    fs::remove_dir_all(dir.path().join("models")).unwrap();
    fs::write(dir.path().join("models"), "not a directory").unwrap();
    assert!(io::write_outputs(dir.path(), &out.artifacts(&cfg)).is_err());
    assert!(dir.path().join(INCOMPLETE_MARKER).exists());
    assert!(!dir.path().join(MANIFEST_FILE).exists());
}
