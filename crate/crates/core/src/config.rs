//! Flat `key=value` run configuration. `#` starts a comment; unknown keys are errors.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::TrainConfig;
use crate::model::{ModelConfig, STAGES};
use crate::optim::OptimizerKind;
use crate::pipeline::{PipelineConfig, SplitMode};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub pipeline: PipelineConfig,
    /// `lookback` and `features` are taken from the prepared dataset at train time.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub input: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seed = 42;
        let mut cfg = RunConfig {
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            seed,
            input: None,
            data: None,
            checkpoint: None,
            out: None,
        };
        cfg.set_seed(seed);
        cfg
    }
}

fn err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("line {line}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| err(line, format!("bad value `{value}` for `{key}`")))
}

fn list<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| num(line, key, v.trim())).collect()
}

fn stages(line: usize, key: &str, value: &str) -> Result<[usize; STAGES]> {
    list(line, key, value)?
        .try_into()
        .map_err(|_| err(line, format!("`{key}` needs {STAGES} comma-separated values")))
}

fn flag(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err(err(line, format!("`{key}` must be on/off or true/false, got `{value}`"))),
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// One seed drives the split shuffle, weight initialization, batch order and dropout.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.pipeline.seed = seed;
        self.model.seed = seed;
        self.train.seed = seed;
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seed = cfg.seed;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(n, format!("expected key=value, found `{line}`")))?;
            let (key, v) = (key.trim(), value.trim());
            let p = &mut cfg.pipeline;
            let m = &mut cfg.model;
            let t = &mut cfg.train;
            match key {
                "lookback" => p.lookback = num(n, key, v)?,
                "horizon" => p.horizon = num(n, key, v)?,
                "sma_windows" => p.sma_windows = list(n, key, v)?,
                "corr_threshold" => p.corr_threshold = num(n, key, v)?,
                "pca" => p.pca = flag(n, key, v)?,
                "pca_variance" => p.pca_variance = num(n, key, v)?,
                "split_ratios" => {
                    p.split_ratios = list::<f64>(n, key, v)?
                        .try_into()
                        .map_err(|_| err(n, "`split_ratios` needs 3 values"))?
                }
                "split_mode" => p.split_mode = v.parse::<SplitMode>().map_err(|e| err(n, e))?,
                "conv_filters" => m.conv_filters = stages(n, key, v)?,
                "kernel_width" => m.kernel_width = num(n, key, v)?,
                "pool_window" => m.pool_window = num(n, key, v)?,
                "lstm_units" => m.lstm_units = stages(n, key, v)?,
                "dropout_rate" => m.dropout_rate = num(n, key, v)?,
                "seed" => seed = num(n, key, v)?,
                "optimizer" => {
                    t.optim.optimizer = match v {
                        "sgd" => OptimizerKind::Sgd,
                        "adam" => OptimizerKind::Adam,
                        _ => return Err(err(n, format!("optimizer must be sgd or adam, got `{v}`"))),
                    }
                }
                "lr0" => t.optim.lr0 = num(n, key, v)?,
                "decay_factor" => t.optim.decay_factor = num(n, key, v)?,
                "decay_every" => t.optim.decay_every = num(n, key, v)?,
                "l2" => t.optim.l2 = num(n, key, v)?,
                "adam_beta1" => t.optim.beta1 = num(n, key, v)?,
                "adam_beta2" => t.optim.beta2 = num(n, key, v)?,
                "adam_eps" => t.optim.eps = num(n, key, v)?,
                "epochs" => t.epochs = num(n, key, v)?,
                "batch_size" => t.batch_size = num(n, key, v)?,
                "shuffle" => t.shuffle = flag(n, key, v)?,
                "input" => cfg.input = Some(PathBuf::from(v)),
                "data" => cfg.data = Some(PathBuf::from(v)),
                "checkpoint" => cfg.checkpoint = Some(PathBuf::from(v)),
                "out" => cfg.out = Some(PathBuf::from(v)),
                _ => return Err(err(n, format!("unknown key `{key}`"))),
            }
        }
        cfg.set_seed(seed);
        cfg.model.lookback = cfg.pipeline.lookback;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.validate()?;
        self.train.validate()?;
        let probe = ModelConfig {
            lookback: self.pipeline.lookback,
            features: 1,
            ..self.model.clone()
        };
        probe.stage_lengths()?;
        Ok(())
    }

    /// Every key with its current value, in a form `parse` accepts.
    pub fn to_text(&self) -> String {
        let p = &self.pipeline;
        let m = &self.model;
        let t = &self.train;
        let o = &t.optim;
        let on = |b: bool| if b { "on" } else { "off" };
        let mut lines = vec![
            "# data preparation".to_string(),
            format!("lookback={}", p.lookback),
            format!("horizon={}", p.horizon),
            format!("sma_windows={}", join(&p.sma_windows)),
            format!("corr_threshold={}", p.corr_threshold),
            format!("pca={}", on(p.pca)),
            format!("pca_variance={}", p.pca_variance),
            format!("split_ratios={}", join(&p.split_ratios)),
            format!("split_mode={}", p.split_mode.as_str()),
            "# model".to_string(),
            format!("conv_filters={}", join(&m.conv_filters)),
            format!("kernel_width={}", m.kernel_width),
            format!("pool_window={}", m.pool_window),
            format!("lstm_units={}", join(&m.lstm_units)),
            format!("dropout_rate={}", m.dropout_rate),
            "# training".to_string(),
            format!("seed={}", self.seed),
            format!(
                "optimizer={}",
                match o.optimizer {
                    OptimizerKind::Sgd => "sgd",
                    OptimizerKind::Adam => "adam",
                }
            ),
            format!("lr0={}", o.lr0),
            format!("decay_factor={}", o.decay_factor),
            format!("decay_every={}", o.decay_every),
            format!("l2={}", o.l2),
            format!("adam_beta1={}", o.beta1),
            format!("adam_beta2={}", o.beta2),
            format!("adam_eps={}", o.eps),
            format!("epochs={}", t.epochs),
            format!("batch_size={}", t.batch_size),
            format!("shuffle={}", on(t.shuffle)),
        ];
        for (key, path) in [
            ("input", &self.input),
            ("data", &self.data),
            ("checkpoint", &self.checkpoint),
            ("out", &self.out),
        ] {
            if let Some(path) = path {
                lines.push(format!("{key}={}", path.display()));
            }
        }
        lines.join("\n") + "\n"
    }
}
