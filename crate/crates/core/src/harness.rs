//! Training loop, evaluation and forecasting.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::{self, MetricsReport};
use crate::model::Model;
use crate::optim::{self, OptimConfig, Optimizer};
use crate::pipeline::{FeatureFrame, PreprocessingState, SplitKind, WindowedDataset};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub shuffle: bool,
    pub seed: u64,
    pub optim: OptimConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            shuffle: true,
            seed: 42,
            optim: OptimConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be at least 1".into()));
        }
        self.optim.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    /// Present when the test split has at least two samples.
    pub test: Option<MetricsReport>,
    pub duration: Duration,
}

impl TrainReport {
    /// `epoch,train_loss,val_loss` with full-precision values.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss\n");
        for r in &self.history {
            out.push_str(&format!("{},{:e},{:e}\n", r.epoch, r.train_loss, r.val_loss));
        }
        out
    }
}

fn diverged(epoch: usize, loss: f64) -> Error {
    Error::Diverged { epoch, loss }
}

/// Scaled-space MSE over a split in inference mode.
pub fn split_loss(model: &Model, ds: &WindowedDataset, indices: &[usize]) -> Result<f64> {
    let (x, y) = ds.batch(indices)?;
    let p = model.predict(&x)?;
    optim::mse(&p, &y)
}

fn check_compatible(model: &Model, ds: &WindowedDataset) -> Result<()> {
    let cfg = model.config();
    if cfg.lookback != ds.lookback || cfg.features != ds.features() {
        return Err(Error::Incompatible(format!(
            "model expects lookback {} with {} features, dataset has lookback {} with {}",
            cfg.lookback,
            cfg.features,
            ds.lookback,
            ds.features()
        )));
    }
    Ok(())
}

/// Trains in place. Shuffling and dropout draw from separate streams of the
/// run seed, so a run is reproducible bit for bit.
pub fn train(
    model: &mut Model,
    ds: &WindowedDataset,
    state: &PreprocessingState,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    check_compatible(model, ds)?;
    let train_idx = &ds.split.train;
    let val_idx = &ds.split.validation;
    if train_idx.is_empty() {
        return Err(Error::EmptySplit("train".into()));
    }
    if val_idx.is_empty() {
        return Err(Error::EmptySplit("validation".into()));
    }

    let started = Instant::now();
    let mut optimizer = Optimizer::new(cfg.optim.clone(), model.params())?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(2);

    let mut order = train_idx.clone();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let label = epoch + 1;
        if cfg.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let (x, y) = ds.batch(chunk)?;
            let (p, caches) = match model.forward(&x, true, &mut dropout_rng) {
                Ok(out) => out,
                Err(Error::NonFinite(_)) => return Err(diverged(label, f64::NAN)),
                Err(e) => return Err(e),
            };
            let loss = optim::mse(&p, &y)?;
            if !loss.is_finite() {
                return Err(diverged(label, loss));
            }
            weighted += loss * chunk.len() as f64;
            // Per-sample derivative of the squared error; backward averages over the batch.
            let grad = Tensor::from_vec(p.data().iter().zip(y.data()).map(|(p, t)| 2.0 * (p - t)).collect())?;
            let caches = caches.expect("training forward returns caches");
            let grads = model.backward(caches, &grad)?;
            match optimizer.step(model.params_mut(), &grads, epoch) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => return Err(diverged(label, loss)),
                Err(e) => return Err(e),
            }
        }
        let train_loss = weighted / order.len() as f64;
        let val_loss = match split_loss(model, ds, val_idx) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => return Err(diverged(label, v)),
            Err(Error::NonFinite(_)) => return Err(diverged(label, f64::NAN)),
            Err(e) => return Err(e),
        };
        let lr = optimizer.lr(epoch);
        log::info!("epoch {label}: train_loss={train_loss:.6e} val_loss={val_loss:.6e} lr={lr:.3e}");
        history.push(EpochRecord {
            epoch: label,
            train_loss,
            val_loss,
            lr,
        });
    }

    let test = match ds.split.test.len() {
        0 => None,
        1 => {
            log::warn!("test split has a single sample; metrics need at least 2");
            None
        }
        _ => Some(evaluate(model, ds, SplitKind::Test, state)?.0),
    };
    Ok(TrainReport {
        history,
        test,
        duration: started.elapsed(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub date: NaiveDate,
    pub actual: f64,
    pub predicted: f64,
}

/// Price-space predictions for one split, in sample order.
pub fn predict_split(
    model: &Model,
    ds: &WindowedDataset,
    split: SplitKind,
    state: &PreprocessingState,
) -> Result<Vec<Prediction>> {
    check_compatible(model, ds)?;
    let idx = ds.split.get(split);
    if idx.is_empty() {
        return Err(Error::EmptySplit(split.as_str().into()));
    }
    let (x, _) = ds.batch(idx)?;
    let scaled = model.predict(&x)?;
    Ok(idx
        .iter()
        .zip(scaled.data())
        .map(|(&i, &s)| Prediction {
            date: ds.target_dates[i],
            actual: ds.target_prices[i],
            predicted: state.unscale_target(s),
        })
        .collect())
}

/// Metrics on inverse-scaled predictions against the unscaled closes.
pub fn evaluate(
    model: &Model,
    ds: &WindowedDataset,
    split: SplitKind,
    state: &PreprocessingState,
) -> Result<(MetricsReport, Vec<Prediction>)> {
    let preds = predict_split(model, ds, split, state)?;
    let actual: Vec<f64> = preds.iter().map(|p| p.actual).collect();
    let predicted: Vec<f64> = preds.iter().map(|p| p.predicted).collect();
    Ok((eval::report(&actual, &predicted)?, preds))
}

pub fn predictions_csv(preds: &[Prediction]) -> String {
    let mut out = String::from("date,actual,predicted\n");
    for p in preds {
        out.push_str(&format!("{},{},{}\n", p.date, p.actual, p.predicted));
    }
    out
}

/// One forecast per complete window of an engineered frame: the close
/// `horizon` rows after `as_of`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Forecast {
    pub as_of: NaiveDate,
    pub predicted: f64,
}

pub fn forecast(model: &Model, state: &PreprocessingState, frame: &FeatureFrame) -> Result<Vec<Forecast>> {
    let t = model.config().lookback;
    if frame.len() < t {
        return Err(Error::TooShort {
            what: format!("a forecast with lookback {t}"),
            length: frame.len(),
            required: t,
        });
    }
    let rows = state.model_inputs(frame)?;
    let f = state.features();
    if f != model.config().features {
        return Err(Error::Incompatible(format!(
            "preprocessing yields {f} features, model expects {}",
            model.config().features
        )));
    }
    let n = rows.len() - t + 1;
    let mut x = Vec::with_capacity(n * t * f);
    for i in 0..n {
        for row in &rows[i..i + t] {
            x.extend_from_slice(row);
        }
    }
    let scaled = model.predict(&Tensor::new(vec![n, t, f], x)?)?;
    Ok(scaled
        .data()
        .iter()
        .enumerate()
        .map(|(i, s)| Forecast {
            as_of: frame.dates[i + t - 1],
            predicted: state.unscale_target(*s),
        })
        .collect())
}

pub fn forecasts_csv(forecasts: &[Forecast]) -> String {
    let mut out = String::from("as_of,predicted\n");
    for f in forecasts {
        out.push_str(&format!("{},{}\n", f.as_of, f.predicted));
    }
    out
}
