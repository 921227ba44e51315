//! CSV ingestion through to split, windowed datasets.
//!
//! Order: load, three-sigma cleaning, mean imputation, moving averages and
//! yield, warm-up cut, split, correlation selection, PCA, min-max scaling.
//! Cleaning statistics come from the whole series; selection, PCA and scaler
//! statistics come from the rows touched by training samples only.

pub mod cache;
pub mod features;
pub mod ohlcv;
pub mod pca;
pub mod scale;
pub mod window;

use std::fmt;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::textfmt::{self, TextReader, TextWriter};
pub use features::{FeatureFrame, DEFAULT_SMA_WINDOWS, TARGET};
pub use ohlcv::{clean_three_sigma, impute_mean, load_ohlcv, read_ohlcv, OhlcvSeries, PRICE_COLUMNS};
pub use pca::PcaState;
pub use scale::ScalerState;
pub use window::{make_windows, Split, SplitKind, SplitMode, WindowedDataset, DEFAULT_RATIOS};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub lookback: usize,
    pub horizon: usize,
    pub sma_windows: Vec<usize>,
    pub corr_threshold: f64,
    pub pca: bool,
    pub pca_variance: f64,
    pub split_ratios: [f64; 3],
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            lookback: 64,
            horizon: 1,
            sma_windows: DEFAULT_SMA_WINDOWS.to_vec(),
            corr_threshold: 0.5,
            pca: true,
            pca_variance: 0.95,
            split_ratios: DEFAULT_RATIOS,
            split_mode: SplitMode::Chronological,
            seed: 42,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.horizon == 0 {
            return Err(Error::Config("lookback and horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.corr_threshold) {
            return Err(Error::Config(format!(
                "corr_threshold must be in [0, 1], got {}",
                self.corr_threshold
            )));
        }
        if !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return Err(Error::Config(format!(
                "pca_variance must be in (0, 1], got {}",
                self.pca_variance
            )));
        }
        if self.sma_windows.contains(&0) {
            return Err(Error::Config("sma_windows entries must be at least 1".into()));
        }
        window::validate_ratios(self.split_ratios)
    }
}

/// Per-column counts from the repair stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CleaningReport {
    pub rows: usize,
    pub outliers: [usize; 5],
    pub imputed: [usize; 5],
}

/// Cleans, imputes and adds engineered features, then drops the warm-up rows.
pub fn engineer(series: &OhlcvSeries, sma_windows: &[usize]) -> Result<(FeatureFrame, CleaningReport)> {
    let before = series.missing_counts();
    let cleaned = clean_three_sigma(series)?;
    let after = cleaned.missing_counts();
    let filled = impute_mean(&cleaned)?;
    let report = CleaningReport {
        rows: series.len(),
        outliers: std::array::from_fn(|c| after[c] - before[c]),
        imputed: after,
    };
    let frame = FeatureFrame::from_series(&filled);
    let frame = features::add_moving_averages(&frame, sma_windows)?;
    let frame = features::add_yield(&frame)?;
    let warm_up = features::warm_up_rows(sma_windows);
    let frame = frame.drop_leading(warm_up);
    debug_assert!(!frame.has_missing());
    Ok((frame, report))
}

/// Everything needed to turn an engineered frame into model inputs and to
/// map model outputs back to prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessingState {
    pub horizon: usize,
    pub sma_windows: Vec<usize>,
    pub selected: Vec<String>,
    pub correlations: Vec<f64>,
    pub pca: Option<PcaState>,
    pub input_scaler: ScalerState,
    pub target_scaler: ScalerState,
}

impl PreprocessingState {
    /// Names of the model's input features, in input order.
    pub fn input_names(&self) -> Vec<String> {
        match &self.pca {
            Some(p) => p.component_names(),
            None => self.selected.clone(),
        }
    }

    pub fn features(&self) -> usize {
        self.input_scaler.width()
    }

    /// Model inputs as `[row][feature]`, looking columns up by name.
    pub fn model_inputs(&self, frame: &FeatureFrame) -> Result<Vec<Vec<f64>>> {
        let mut cols = Vec::with_capacity(self.selected.len());
        for name in &self.selected {
            if frame.index_of(name).is_none() {
                return Err(Error::Incompatible(format!(
                    "input data has no feature `{name}` required by the checkpoint"
                )));
            }
            cols.push(frame.complete_column(name)?);
        }
        if let Some(p) = &self.pca {
            cols = p.transform(&cols)?;
        }
        let scaled = self.input_scaler.transform(&cols);
        Ok((0..frame.len())
            .map(|r| scaled.iter().map(|c| c[r]).collect())
            .collect())
    }

    pub fn scale_target(&self, price: f64) -> f64 {
        self.target_scaler.transform_value(0, price)
    }

    pub fn unscale_target(&self, scaled: f64) -> f64 {
        self.target_scaler.inverse_value(0, scaled)
    }

    pub(crate) fn write(&self, w: &mut TextWriter) {
        w.section("preprocessing");
        w.kv("horizon", self.horizon);
        w.kv("sma_windows", join_usize(&self.sma_windows));
        w.kv("selected", self.selected.join(","));
        w.kv("correlations", textfmt::join_f64(&self.correlations));
        match &self.pca {
            Some(p) => {
                w.kv("pca", "on");
                w.kv("pca_retained", p.retained);
                let n = p.features();
                w.block("pca.mean", &[n], &p.mean);
                w.block("pca.std", &[n], &p.std);
                w.block("pca.basis", &[n, n], &p.basis.concat());
                w.block("pca.eigenvalues", &[n], &p.eigenvalues);
            }
            None => w.kv("pca", "off"),
        }
        let f = self.input_scaler.width();
        w.block("scaler.min", &[f], &self.input_scaler.min);
        w.block("scaler.max", &[f], &self.input_scaler.max);
        w.block("target.min", &[1], &self.target_scaler.min);
        w.block("target.max", &[1], &self.target_scaler.max);
    }

    pub(crate) fn read(r: &mut TextReader) -> Result<Self> {
        r.expect_section("preprocessing")?;
        let kv = r.key_values()?;
        let get = |k: &str| textfmt::lookup(&kv, k);
        let horizon = textfmt::parse_value("horizon", get("horizon")?)?;
        let sma_windows = textfmt::parse_list("sma_windows", get("sma_windows")?)?;
        let selected: Vec<String> = textfmt::parse_list("selected", get("selected")?)?;
        let correlations = textfmt::parse_list("correlations", get("correlations")?)?;
        if selected.is_empty() || correlations.len() != selected.len() {
            return Err(Error::Malformed {
                line: r.line_no(),
                detail: "selected features and correlations disagree".into(),
            });
        }
        let p = selected.len();
        let pca = match get("pca")? {
            "on" => {
                let retained: usize = textfmt::parse_value("pca_retained", get("pca_retained")?)?;
                let mean = read_exact(r, "pca.mean", &[p])?;
                let std = read_exact(r, "pca.std", &[p])?;
                let basis = read_exact(r, "pca.basis", &[p, p])?;
                let eigenvalues = read_exact(r, "pca.eigenvalues", &[p])?;
                if retained == 0 || retained > p {
                    return Err(Error::Malformed {
                        line: r.line_no(),
                        detail: format!("pca_retained {retained} outside 1..={p}"),
                    });
                }
                Some(PcaState {
                    mean,
                    std,
                    basis: basis.chunks(p).map(<[f64]>::to_vec).collect(),
                    eigenvalues,
                    retained,
                })
            }
            "off" => None,
            other => {
                return Err(Error::Malformed {
                    line: r.line_no(),
                    detail: format!("pca must be on or off, found `{other}`"),
                })
            }
        };
        let f = pca.as_ref().map_or(p, |s| s.retained);
        let input_scaler = ScalerState {
            min: read_exact(r, "scaler.min", &[f])?,
            max: read_exact(r, "scaler.max", &[f])?,
        };
        let target_scaler = ScalerState {
            min: read_exact(r, "target.min", &[1])?,
            max: read_exact(r, "target.max", &[1])?,
        };
        Ok(PreprocessingState {
            horizon,
            sma_windows,
            selected,
            correlations,
            pca,
            input_scaler,
            target_scaler,
        })
    }
}

pub(crate) fn join_usize(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

/// Reads a named block and checks its shape.
pub(crate) fn read_exact(r: &mut TextReader, name: &str, shape: &[usize]) -> Result<Vec<f64>> {
    let b = r.named_block(name)?;
    if b.shape != shape {
        return Err(Error::ShapeDisagreement {
            name: name.to_string(),
            expected: shape.to_vec(),
            found: b.shape,
        });
    }
    Ok(b.values)
}

/// A prepared dataset: model-ready rows plus the split, before windowing.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedData {
    pub dates: Vec<NaiveDate>,
    /// `[row][feature]`, already selected, projected and scaled.
    pub inputs: Vec<Vec<f64>>,
    /// Unscaled closing prices.
    pub close: Vec<f64>,
    pub lookback: usize,
    pub split_mode: SplitMode,
    pub split: Split,
    pub state: PreprocessingState,
}

impl PreparedData {
    pub fn rows(&self) -> usize {
        self.dates.len()
    }

    pub fn features(&self) -> usize {
        self.state.features()
    }

    pub fn windows(&self) -> Result<WindowedDataset> {
        let scaled: Vec<f64> = self.close.iter().map(|c| self.state.scale_target(*c)).collect();
        let mut ds = make_windows(
            &self.inputs,
            &scaled,
            &self.close,
            &self.dates,
            self.lookback,
            self.state.horizon,
        )?;
        ds.split = self.split.clone();
        Ok(ds)
    }
}

/// Human-readable account of a `prepare` run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrepareSummary {
    pub cleaning: CleaningReport,
    pub rows_kept: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
    pub corr_threshold: f64,
    /// Every candidate with its correlation (None when constant) and whether it was kept.
    pub candidates: Vec<(String, Option<f64>, bool)>,
    /// (retained, total, explained share) when PCA ran.
    pub pca: Option<(usize, usize, f64)>,
    pub inputs: Vec<String>,
    pub samples: usize,
    pub lookback: usize,
    pub horizon: usize,
    pub split_mode: SplitMode,
    pub split_sizes: (usize, usize, usize),
}

impl fmt::Display for PrepareSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let per_column = |counts: &[usize; 5]| {
            PRICE_COLUMNS
                .iter()
                .zip(counts)
                .map(|(n, c)| format!("{n}={c}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        writeln!(f, "rows read: {}", self.cleaning.rows)?;
        writeln!(f, "outliers replaced: {}", per_column(&self.cleaning.outliers))?;
        writeln!(f, "cells imputed: {}", per_column(&self.cleaning.imputed))?;
        writeln!(
            f,
            "rows kept after warm-up: {} ({} .. {})",
            self.rows_kept, self.first_date, self.last_date
        )?;
        writeln!(f, "correlation with close (threshold {:.2}):", self.corr_threshold)?;
        for (name, r, kept) in &self.candidates {
            let r = r.map_or("constant".to_string(), |r| format!("r={r:+.4}"));
            let verdict = if *kept { "selected" } else { "dropped" };
            writeln!(f, "  {name:<10} {r:<10} {verdict}")?;
        }
        match self.pca {
            Some((k, p, share)) => writeln!(f, "pca: {k} of {p} components, explained share {share:.4}")?,
            None => writeln!(f, "pca: off")?,
        }
        writeln!(f, "model inputs: {}", self.inputs.join(","))?;
        writeln!(
            f,
            "samples: {} (lookback {}, horizon {})",
            self.samples, self.lookback, self.horizon
        )?;
        let (a, b, c) = self.split_sizes;
        writeln!(
            f,
            "split ({}): train={a} validation={b} test={c}",
            self.split_mode.as_str()
        )
    }
}

/// Rows touched (inputs and target) by the given samples, ascending.
pub fn rows_touched(samples: &[usize], lookback: usize, horizon: usize, rows: usize) -> Vec<usize> {
    let mut used = vec![false; rows];
    for &i in samples {
        for r in i..=window::target_row(i, lookback, horizon) {
            used[r] = true;
        }
    }
    (0..rows).filter(|&r| used[r]).collect()
}

pub fn prepare(series: &OhlcvSeries, cfg: &PipelineConfig) -> Result<(PreparedData, PrepareSummary)> {
    cfg.validate()?;
    let (frame, cleaning) = engineer(series, &cfg.sma_windows)?;
    let n = window::sample_count(frame.len(), cfg.lookback, cfg.horizon)?;
    let split = window::split_indices(n, cfg.split_ratios, cfg.split_mode, cfg.seed)?;
    if split.train.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    let fit_rows = rows_touched(&split.train, cfg.lookback, cfg.horizon, frame.len());

    let kept = features::select_by_correlation(&frame, &fit_rows, cfg.corr_threshold)?;
    if kept.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no feature reaches |r| >= {} against close",
            cfg.corr_threshold
        )));
    }
    let close = frame.complete_column(TARGET)?;
    let fit_close: Vec<f64> = fit_rows.iter().map(|&r| close[r]).collect();
    let candidates = frame
        .names
        .iter()
        .filter(|n| *n != TARGET)
        .map(|name| {
            let col = frame.complete_column(name)?;
            let fit: Vec<f64> = fit_rows.iter().map(|&r| col[r]).collect();
            let r = features::pearson(&fit, &fit_close);
            Ok((name.clone(), r, kept.iter().any(|(k, _)| k == name)))
        })
        .collect::<Result<Vec<_>>>()?;

    let selected: Vec<String> = kept.iter().map(|(n, _)| n.clone()).collect();
    let mut cols = selected
        .iter()
        .map(|n| frame.complete_column(n))
        .collect::<Result<Vec<_>>>()?;
    let pca = if cfg.pca {
        let p = PcaState::fit(&cols, &fit_rows, cfg.pca_variance)?;
        cols = p.transform(&cols)?;
        Some(p)
    } else {
        None
    };
    let input_scaler = ScalerState::fit(&cols, &fit_rows)?;
    let target_scaler = ScalerState::fit(std::slice::from_ref(&close), &fit_rows)?;
    let state = PreprocessingState {
        horizon: cfg.horizon,
        sma_windows: cfg.sma_windows.clone(),
        selected,
        correlations: kept.iter().map(|(_, r)| *r).collect(),
        pca,
        input_scaler,
        target_scaler,
    };
    let inputs = state.model_inputs(&frame)?;

    let summary = PrepareSummary {
        cleaning,
        rows_kept: frame.len(),
        first_date: frame.dates[0],
        last_date: *frame.dates.last().expect("non-empty frame"),
        corr_threshold: cfg.corr_threshold,
        candidates,
        pca: state
            .pca
            .as_ref()
            .map(|p| (p.retained, p.features(), p.explained_share())),
        inputs: state.input_names(),
        samples: n,
        lookback: cfg.lookback,
        horizon: cfg.horizon,
        split_mode: cfg.split_mode,
        split_sizes: split.sizes(),
    };
    let data = PreparedData {
        dates: frame.dates,
        inputs,
        close,
        lookback: cfg.lookback,
        split_mode: cfg.split_mode,
        split,
        state,
    };
    Ok((data, summary))
}
