use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn eventseer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eventseer"))
        .args(args)
        .env("EVENTSEER_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_synth(dir: &Path) {
    let out = eventseer(&[
        "synth",
        "--out",
        p(dir),
        "--n",
        "3000",
        "--features",
        "2",
        "--events",
        "20",
        "--event-width",
        "6",
        "--amplitude",
        "4",
        "--gap",
        "40",
        "--seed",
        "9",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
}

fn quick_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(
        &path,
        r#"{
  "width": 6, "step": 1, "width_events": 6.0,
  "base_models": [
    {"kind": "ffn", "config": {"hidden_layers": [8], "epochs": 40, "batch_size": 64, "learning_rate": 0.003}},
    {"kind": "ridge", "lambda": 1.0}
  ],
  "seed": 3
}"#,
    )
    .unwrap();
    path
}

#[test]
fn zero_width_is_a_config_error_naming_the_flag() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path());
    let out = eventseer(&[
        "fit",
        "--width",
        "0",
        "--dataset",
        p(&dir.path().join("dataset.csv")),
        "--events",
        p(&dir.path().join("events.csv")),
        "--output-dir",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("--width"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_and_bad_config_exit_one() {
    assert_eq!(eventseer(&["fit", "--no-such-flag"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"splits": {"train": 0.5, "validation": 0.2, "test": 0.2}}"#).unwrap();
    let out = eventseer(&["fit", "--config", p(&cfg), "--dataset", "a.csv", "--events", "b.csv"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    assert!(stderr(&out).contains("sum to 1"));
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = eventseer(&[
        "fit",
        "--dataset",
        p(&dir.path().join("nope.csv")),
        "--events",
        p(&dir.path().join("nope_events.csv")),
        "--output-dir",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn reversed_event_is_rejected_with_its_row() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path());
    fs::write(dir.path().join("events.csv"), "start,end\n100,106\n512,506\n").unwrap();
    let out = eventseer(&[
        "fit",
        "--config",
        p(&quick_config(dir.path())),
        "--dataset",
        p(&dir.path().join("dataset.csv")),
        "--events",
        p(&dir.path().join("events.csv")),
        "--output-dir",
        p(&dir.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("row 2"), "{}", stderr(&out));
}

#[test]
fn fit_then_detect_reproduces_events() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(dir.path());
    // one NaN row is dropped with a warning, not an error
    let data = dir.path().join("dataset.csv");
    let text = fs::read_to_string(&data).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let t = lines[41].split(',').next().unwrap().to_string();
    lines[41] = format!("{t},NaN,0");
    fs::write(&data, lines.join("\n") + "\n").unwrap();

    let out_dir = dir.path().join("out");
    let out = eventseer(&[
        "fit",
        "--config",
        p(&quick_config(dir.path())),
        "--dataset",
        p(&data),
        "--events",
        p(&dir.path().join("events.csv")),
        "--output-dir",
        p(&out_dir),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("dropped 1 row"), "{}", stderr(&out));
    for name in [
        "config_echo.json",
        "losses.csv",
        "op_true.csv",
        "op_pred.csv",
        "events_true.csv",
        "events_pred.csv",
        "metrics.json",
        "deltat_hist.csv",
        "manifest.json",
    ] {
        assert!(out_dir.join(name).is_file(), "{name} missing");
    }
    assert!(out_dir.join("models").join("stack.json").is_file());
    assert!(!out_dir.join(".incomplete").exists());
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics["split"], "test");
    assert!(metrics["f1"].as_f64().unwrap() >= 0.0);

    let det = dir.path().join("det");
    let out = eventseer(&[
        "detect",
        "--model",
        p(&out_dir.join("models")),
        "--dataset",
        p(&data),
        "--output-dir",
        p(&det),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        fs::read(det.join("events_pred.csv")).unwrap(),
        fs::read(out_dir.join("events_pred.csv")).unwrap()
    );
    assert_eq!(
        fs::read(det.join("op_pred.csv")).unwrap(),
        fs::read(out_dir.join("op_pred.csv")).unwrap()
    );

    // a dataset with a different number of features cannot be scored
    let mut narrow = String::from("time,x0\n");
    for i in 0..100 {
        let _ = writeln!(narrow, "{i},0");
    }
    fs::write(dir.path().join("narrow.csv"), narrow).unwrap();
    let out = eventseer(&[
        "detect",
        "--model",
        p(&out_dir.join("models")),
        "--dataset",
        p(&dir.path().join("narrow.csv")),
        "--output-dir",
        p(&det),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn evaluate_prints_a_score_report() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pred.csv"), "start,end\n9,11\n50,52\n").unwrap();
    fs::write(dir.path().join("truth.csv"), "mid\n10.5\n30\n").unwrap();
    let out = eventseer(&[
        "evaluate",
        "--pred",
        p(&dir.path().join("pred.csv")),
        "--truth",
        p(&dir.path().join("truth.csv")),
        "--tolerance",
        "1",
        "--output-dir",
        p(&dir.path().join("eval")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["true_positive"], 1);
    assert_eq!(report["false_positive"], 1);
    assert_eq!(report["false_negative"], 1);
    assert_eq!(report["f1"], 0.5);
    assert_eq!(report["delta_t_mean"], -0.5);
    assert!(dir.path().join("eval").join("deltat_hist.csv").is_file());
}

#[test]
fn synth_is_deterministic_and_checks_feasibility() {
    let dir = tempfile::tempdir().unwrap();
    small_synth(&dir.path().join("a"));
    small_synth(&dir.path().join("b"));
    for f in ["dataset.csv", "events.csv"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let out = eventseer(&[
        "synth",
        "--out",
        p(&dir.path().join("c")),
        "--n",
        "100",
        "--events",
        "10",
        "--gap",
        "50",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("infeasible"));
}
