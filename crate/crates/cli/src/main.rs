use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eventseer::ensemble::CombinerKind;
use eventseer::io::{self, RunConfig};
use eventseer::metrics::{delta_t_histogram, match_events, score};
use eventseer::synth::{generate, SynthConfig};
use eventseer::{pipeline, Error, ErrorClass, Execution};

#[derive(Parser)]
#[command(name = "eventseer", version, about = "Event detection in multivariate time series")]
struct Cli {
    /// Run everything on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a stack, tune extraction and write the output directory.
    Fit(FitArgs),
    /// Apply a trained model directory to a dataset.
    Detect(DetectArgs),
    /// Score predicted events against reference events.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset with known events.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CombinerArg {
    Average,
    MetaFfn,
}

#[derive(Args)]
struct FitArgs {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    events: Option<PathBuf>,
    /// Window width in samples.
    #[arg(long)]
    width: Option<usize>,
    /// Window step in samples.
    #[arg(long)]
    step: Option<usize>,
    /// Normalized event width in seconds.
    #[arg(long)]
    width_events: Option<f64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    combiner: Option<CombinerArg>,
    /// Match tolerance in seconds (default: the event width).
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Args)]
struct DetectArgs {
    /// Model directory (the `models/` folder of a fit).
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    output_dir: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    tolerance: f64,
    /// Normalize both event sets to this width before matching.
    #[arg(long)]
    width_events: Option<f64>,
    /// Also write metrics.json and deltat_hist.csv here.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Histogram bin width in seconds (default: tolerance / 10).
    #[arg(long)]
    bin_width: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20_000)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    features: usize,
    #[arg(long, default_value_t = 40)]
    events: usize,
    #[arg(long, default_value_t = 8.0)]
    event_width: f64,
    #[arg(long, default_value_t = 3.0)]
    amplitude: f64,
    #[arg(long, default_value_t = 50.0)]
    gap: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn flag_error(flag: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("--{flag}: {reason}"))
}

fn resolve_config(args: FitArgs) -> Result<RunConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(w) = args.width {
        if w == 0 {
            return Err(flag_error("width", "must be >= 1, got 0"));
        }
        cfg.width = w;
    }
    if let Some(s) = args.step {
        if s == 0 {
            return Err(flag_error("step", "must be >= 1, got 0"));
        }
        cfg.step = s;
    }
    if let Some(we) = args.width_events {
        if !(we > 0.0) {
            return Err(flag_error("width-events", format!("must be > 0, got {we}")));
        }
        cfg.width_events = we;
    }
    if let Some(t) = args.tolerance {
        if !(t > 0.0) {
            return Err(flag_error("tolerance", format!("must be > 0, got {t}")));
        }
        cfg.tolerance = Some(t);
    }
    if let Some(p) = args.dataset {
        cfg.dataset_path = Some(p);
    }
    if let Some(p) = args.events {
        cfg.events_path = Some(p);
    }
    if let Some(p) = args.output_dir {
        cfg.output_dir = p;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.combiner {
        cfg.combiner = match c {
            CombinerArg::Average => CombinerKind::Average,
            CombinerArg::MetaFfn => CombinerKind::MetaFfn,
        };
    }
    Ok(cfg)
}

fn cmd_fit(args: FitArgs, exec: Execution) -> Result<(), Error> {
    let cfg = resolve_config(args)?;
    let outcome = pipeline::fit(&cfg, exec)?;
    io::write_outputs(&cfg.output_dir, &outcome.artifacts(&cfg))?;
    let m = &outcome.metrics;
    log::info!("wrote {}", cfg.output_dir.display());
    println!("{}", serde_json::to_string_pretty(m)?);
    Ok(())
}

fn cmd_detect(args: DetectArgs) -> Result<(), Error> {
    let (op, events) = pipeline::detect_file(&args.model, &args.dataset)?;
    std::fs::create_dir_all(&args.output_dir).map_err(|e| Error::Io {
        path: args.output_dir.clone(),
        source: e,
    })?;
    io::write_op(&args.output_dir.join("op_pred.csv"), &op)?;
    io::write_events(&args.output_dir.join("events_pred.csv"), &events)?;
    log::info!("{} events detected", events.len());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    if !(args.tolerance > 0.0) {
        return Err(flag_error("tolerance", format!("must be > 0, got {}", args.tolerance)));
    }
    let mut pred = io::load_events(&args.pred)?;
    let mut truth = io::load_events(&args.truth)?;
    if let Some(w) = args.width_events {
        pred = pred.to_fixed_width(w)?;
        truth = truth.to_fixed_width(w)?;
    }
    let m = match_events(&pred, &truth, args.tolerance);
    let report = score(&m);
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(dir) = &args.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::Io { path: p, source: e })
        };
        write("metrics.json", format!("{json}\n"))?;
        let bin = args.bin_width.unwrap_or(args.tolerance / 10.0);
        if !(bin > 0.0) {
            return Err(flag_error("bin-width", format!("must be > 0, got {bin}")));
        }
        write("deltat_hist.csv", io::histogram_csv(&delta_t_histogram(&m, bin)))?;
    }
    println!("{json}");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let cfg = SynthConfig {
        n_samples: args.n,
        n_features: args.features,
        n_events: args.events,
        event_width: args.event_width,
        bump_amplitude: args.amplitude,
        min_event_gap: args.gap,
        seed: args.seed,
        ..SynthConfig::default()
    };
    let (series, events) = generate(&cfg)?;
    let out: &Path = &args.out;
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    io::write_series(&out.join("dataset.csv"), &series)?;
    io::write_events(&out.join("events.csv"), &events)?;
    log::info!(
        "wrote {} samples and {} events to {}",
        series.len(),
        events.len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("EVENTSEER_LOG", "info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a, exec),
        Command::Detect(a) => cmd_detect(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 1,
                ErrorClass::Data => 2,
                ErrorClass::Training => 3,
            })
        }
    }
}
