//! Command-line front end. Results go to stdout, diagnostics to stderr.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::gradcheck::{self, GradCheckOptions, DEFAULT_TOLERANCE};
use crate::harness::{self, TrainConfig};
use crate::model::{Model, ModelConfig};
use crate::pipeline::{self, cache, PreparedData, SplitKind};
use crate::plot;
use crate::synth::{self, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "cnnlstm", version, about = "CNN-LSTM closing-price forecaster")]
pub struct Cli {
    /// Log progress (per-epoch losses) to stderr.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Clean, engineer, select, project, scale, window and split a CSV.
    Prepare(PrepareArgs),
    /// Train a model on a prepared dataset.
    Train(TrainArgs),
    /// Print metrics for a split and write predictions.csv.
    Evaluate(EvaluateArgs),
    /// Predict prices from a prepared dataset split or a raw CSV.
    Predict(PredictArgs),
    /// Write an SVG overlay of actual and predicted prices.
    Plot(PlotArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
    /// Write a seeded noisy-sine OHLCV CSV.
    Synth(SynthArgs),
    /// Print every configuration key with its default value.
    Defaults,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prepared dataset path; the summary is written next to it as `<stem>.summary.txt`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Checkpoint path; `loss_history.csv` (and `loss.svg`) go to the same directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write `loss.svg`.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Predictions CSV; defaults to `predictions.csv` beside the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Prepared dataset: predict one split (`date,actual,predicted`).
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    pub data: Option<PathBuf>,
    /// Raw OHLCV CSV: one forecast per complete window (`as_of,predicted`).
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: String,
    /// SVG path; defaults to `overlay.svg` beside the checkpoint.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scale one analytic gradient by (1 + factor) to confirm the check fails.
    #[arg(long, hide = true)]
    pub corrupt_backward: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1200)]
    pub rows: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

fn required(flag: Option<PathBuf>, from_config: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| from_config.clone())
        .ok_or_else(|| Error::Config(format!("--{name} is required (or set `{name}=` in the config)")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from(name), |d| d.join(name))
}

pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "prepared".into(), |s| s.to_string_lossy().into_owned());
    sibling(out, &format!("{stem}.summary.txt"))
}

fn stdout_line(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

pub fn prepare(args: PrepareArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let input = required(args.input, &cfg.input, "input")?;
    let out = required(args.out, &cfg.out, "out")?;
    let series = pipeline::load_ohlcv(&input)?;
    let (data, summary) = pipeline::prepare(&series, &cfg.pipeline)?;
    write_file(&out, &cache::to_text(&data))?;
    let text = summary.to_string();
    write_file(&summary_path(&out), &text)?;
    stdout_line(&text);
    Ok(())
}

/// Trains on a prepared dataset with the given run configuration.
pub fn train_prepared(data: &PreparedData, cfg: &RunConfig) -> Result<(Checkpoint, harness::TrainReport)> {
    let ds = data.windows()?;
    let model_cfg = ModelConfig {
        lookback: data.lookback,
        features: data.features(),
        ..cfg.model.clone()
    };
    let mut model = Model::build(model_cfg)?;
    let report = harness::train(&mut model, &ds, &data.state, &cfg.train)?;
    Ok((Checkpoint::new(model, data.state.clone())?, report))
}

pub fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref(), args.seed)?;
    if let Some(e) = args.epochs {
        cfg.train = TrainConfig { epochs: e, ..cfg.train };
        cfg.validate()?;
    }
    let data_path = required(args.data, &cfg.data, "data")?;
    let out = required(args.out, &cfg.out, "out")?;
    let data = cache::load(&data_path)?;
    if data.lookback != cfg.pipeline.lookback {
        log::info!(
            "using the dataset's lookback {} (config says {})",
            data.lookback,
            cfg.pipeline.lookback
        );
    }
    let (ck, report) = train_prepared(&data, &cfg)?;
    write_file(&out, &ck.to_text())?;
    write_file(&sibling(&out, "loss_history.csv"), &report.loss_csv())?;
    if args.plot {
        write_file(&sibling(&out, "loss.svg"), &plot::loss_chart(&report.history))?;
    }
    let first = report.history.first().expect("epochs >= 1");
    let last = report.history.last().expect("epochs >= 1");
    let mut text = format!(
        "epochs: {}\nfirst epoch: train_loss={:e} val_loss={:e}\nfinal epoch: train_loss={:e} val_loss={:e}\n",
        report.history.len(),
        first.train_loss,
        first.val_loss,
        last.train_loss,
        last.val_loss
    );
    if let Some(m) = &report.test {
        text.push_str("test metrics:\n");
        text.push_str(&m.to_string());
    }
    stdout_line(&text);
    log::info!("training took {:.1?}", report.duration);
    Ok(())
}

/// Loads a checkpoint and a dataset and checks they were built by the same preprocessing.
pub fn load_pair(checkpoint: &Path, data: &Path) -> Result<(Checkpoint, PreparedData)> {
    let ck = Checkpoint::load(checkpoint)?;
    let data = cache::load(data)?;
    ensure_compatible(&ck, &data)?;
    Ok((ck, data))
}

pub fn ensure_compatible(ck: &Checkpoint, data: &PreparedData) -> Result<()> {
    let c = ck.model.config();
    if c.lookback != data.lookback || c.features != data.features() {
        return Err(Error::Incompatible(format!(
            "checkpoint expects lookback {} with {} features ({}), dataset has lookback {} with {} ({})",
            c.lookback,
            c.features,
            ck.state.input_names().join(","),
            data.lookback,
            data.features(),
            data.state.input_names().join(",")
        )));
    }
    if ck.state != data.state {
        return Err(Error::Incompatible(
            "dataset was prepared with different preprocessing statistics than the checkpoint; \
             use `predict --input` to apply the checkpoint's preprocessing to new data"
                .into(),
        ));
    }
    Ok(())
}

pub fn evaluate(args: EvaluateArgs) -> Result<()> {
    let split: SplitKind = args.split.parse()?;
    let (ck, data) = load_pair(&args.checkpoint, &args.data)?;
    let ds = data.windows()?;
    let (metrics, preds) = harness::evaluate(&ck.model, &ds, split, &ck.state)?;
    let out = args
        .out
        .unwrap_or_else(|| sibling(&args.checkpoint, "predictions.csv"));
    write_file(&out, &harness::predictions_csv(&preds))?;
    stdout_line(&format!("split: {}\n{metrics}", split.as_str()));
    Ok(())
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let text = match (&args.data, &args.input) {
        (Some(data_path), _) => {
            let split: SplitKind = args.split.parse()?;
            let (ck, data) = load_pair(&args.checkpoint, data_path)?;
            let ds = data.windows()?;
            harness::predictions_csv(&harness::predict_split(&ck.model, &ds, split, &ck.state)?)
        }
        (None, Some(input)) => {
            let ck = Checkpoint::load(&args.checkpoint)?;
            let series = pipeline::load_ohlcv(input)?;
            let (frame, _) = pipeline::engineer(&series, &ck.state.sma_windows)?;
            harness::forecasts_csv(&harness::forecast(&ck.model, &ck.state, &frame)?)
        }
        (None, None) => return Err(Error::Config("predict needs --data or --input".into())),
    };
    match args.out {
        Some(path) => write_file(&path, &text),
        None => {
            stdout_line(&text);
            Ok(())
        }
    }
}

pub fn plot(args: PlotArgs) -> Result<()> {
    let split: SplitKind = args.split.parse()?;
    let (ck, data) = load_pair(&args.checkpoint, &args.data)?;
    let ds = data.windows()?;
    let preds = harness::predict_split(&ck.model, &ds, split, &ck.state)?;
    let out = args.out.unwrap_or_else(|| sibling(&args.checkpoint, "overlay.svg"));
    let title = format!("Actual vs predicted close ({} split)", split.as_str());
    write_file(&out, &plot::overlay_chart(&preds, &title))?;
    stdout_line(&format!("wrote {}\n", out.display()));
    Ok(())
}

/// Runs the gradient checks and renders the report; the flag says whether all passed.
pub fn gradcheck_report(seed: u64, corrupt: Option<f64>) -> Result<(String, bool)> {
    let opts = GradCheckOptions {
        corrupt,
        ..GradCheckOptions::default()
    };
    let reports = gradcheck::run_all(seed, opts)?;
    let mut text = String::new();
    let mut ok = true;
    for r in &reports {
        let worst = r.max_relative_error();
        let failures = r.failures(DEFAULT_TOLERANCE);
        let verdict = if failures.is_empty() { "ok" } else { "FAIL" };
        text.push_str(&format!("{:<16} max_relative_error={worst:.3e} {verdict}\n", r.label));
        for f in failures {
            ok = false;
            text.push_str(&format!("  {} max_relative_error={:.3e}\n", f.name, f.max_relative_error));
        }
    }
    Ok((text, ok))
}

pub fn gradcheck(args: GradcheckArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref(), args.seed)?;
    let (text, ok) = gradcheck_report(cfg.seed, args.corrupt_backward)?;
    stdout_line(&text);
    if ok {
        Ok(())
    } else {
        Err(Error::Verification(format!(
            "relative error above {DEFAULT_TOLERANCE:e} (see report)"
        )))
    }
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let series = synth::noisy_sine(&SynthConfig {
        rows: args.rows,
        seed: args.seed,
        ..SynthConfig::default()
    })?;
    write_file(&args.out, &series.to_csv())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(a) => prepare(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Predict(a) => predict(a),
        Command::Plot(a) => plot(a),
        Command::Gradcheck(a) => gradcheck(a),
        Command::Synth(a) => synth(a),
        Command::Defaults => {
            stdout_line(&RunConfig::default().to_text());
            Ok(())
        }
    }
}
