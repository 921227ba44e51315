//! The fixed conv/pool/LSTM stack:
//!
//! ```text
//! Input → Conv1D → MaxPool1D → LSTM(seq) → Dropout
//!       → Conv1D → MaxPool1D → LSTM(seq) → Dropout
//!       → Conv1D → MaxPool1D → LSTM(last) → Dense(1)
//! ```
//!
//! Conv layers are followed by `tanh`; the dense head is linear.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::layers::{
    dropout, dropout_backward, maxpool1d_backward, maxpool1d_forward, Conv1dCache, Conv1dParams,
    DenseCache, DenseParams, DropoutCache, LstmCache, LstmParams, MaxPoolCache, NamedTensors,
};
use crate::tensor::Tensor;

pub const STAGES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub lookback: usize,
    pub features: usize,
    pub conv_filters: [usize; STAGES],
    pub kernel_width: usize,
    pub pool_window: usize,
    pub lstm_units: [usize; STAGES],
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            lookback: 64,
            features: 1,
            conv_filters: [32, 64, 64],
            kernel_width: 3,
            pool_window: 2,
            lstm_units: [64, 64, 64],
            dropout_rate: 0.2,
            seed: 42,
        }
    }
}

/// Sequence lengths after the conv and pool of one stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageLengths {
    pub after_conv: usize,
    pub after_pool: usize,
}

impl ModelConfig {
    /// Validates extents and returns the per-stage sequence lengths.
    pub fn stage_lengths(&self) -> Result<[StageLengths; STAGES]> {
        let positive = self.lookback > 0
            && self.features > 0
            && self.kernel_width > 0
            && self.pool_window > 0
            && self.conv_filters.iter().all(|&k| k > 0)
            && self.lstm_units.iter().all(|&h| h > 0);
        if !positive {
            return Err(Error::Config(format!("all model extents must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        let mut len = self.lookback;
        let mut out = [StageLengths {
            after_conv: 0,
            after_pool: 0,
        }; STAGES];
        for (stage, slot) in out.iter_mut().enumerate() {
            if len < self.kernel_width {
                return Err(Error::Config(format!(
                    "sequence collapses at stage {} conv: length {len} < kernel_width {}",
                    stage + 1,
                    self.kernel_width
                )));
            }
            let after_conv = len - self.kernel_width + 1;
            let after_pool = after_conv / self.pool_window;
            if after_pool == 0 {
                return Err(Error::Config(format!(
                    "sequence collapses at stage {} pool: length {after_conv} -> 0 with pool_window {}",
                    stage + 1,
                    self.pool_window
                )));
            }
            *slot = StageLengths {
                after_conv,
                after_pool,
            };
            len = after_pool;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Input,
    Conv1d,
    MaxPool1d,
    Lstm { return_sequence: bool },
    Dropout,
    Dense,
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerKind::Input => write!(f, "Input"),
            LayerKind::Conv1d => write!(f, "Conv1D"),
            LayerKind::MaxPool1d => write!(f, "MaxPooling1D"),
            LayerKind::Lstm { .. } => write!(f, "LSTM"),
            LayerKind::Dropout => write!(f, "Dropout"),
            LayerKind::Dense => write!(f, "Dense"),
        }
    }
}

pub const ARCHITECTURE: [LayerKind; 13] = [
    LayerKind::Input,
    LayerKind::Conv1d,
    LayerKind::MaxPool1d,
    LayerKind::Lstm {
        return_sequence: true,
    },
    LayerKind::Dropout,
    LayerKind::Conv1d,
    LayerKind::MaxPool1d,
    LayerKind::Lstm {
        return_sequence: true,
    },
    LayerKind::Dropout,
    LayerKind::Conv1d,
    LayerKind::MaxPool1d,
    LayerKind::Lstm {
        return_sequence: false,
    },
    LayerKind::Dense,
];

/// All trainable tensors of the stack. Also used to carry gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub conv: [Conv1dParams; STAGES],
    pub lstm: [LstmParams; STAGES],
    pub dense: DenseParams,
}

const CONV_NAMES: [&str; STAGES] = ["conv1", "conv2", "conv3"];
const LSTM_NAMES: [&str; STAGES] = ["lstm1", "lstm2", "lstm3"];

/// One named parameter tensor, flagged when it is a bias (exempt from L2).
pub struct ParamRef<'a> {
    pub name: String,
    pub is_bias: bool,
    pub tensor: &'a Tensor,
}

pub struct ParamMut<'a> {
    pub name: String,
    pub is_bias: bool,
    pub tensor: &'a mut Tensor,
}

fn is_bias(local: &str) -> bool {
    local == "bias" || local.starts_with("b_")
}

impl Parameters {
    pub fn zeros(config: &ModelConfig) -> Self {
        let mut f_in = config.features;
        let conv: [Conv1dParams; STAGES] = std::array::from_fn(|s| {
            let p = Conv1dParams::zeros(config.conv_filters[s], config.kernel_width, f_in);
            f_in = config.lstm_units[s];
            p
        });
        let lstm = std::array::from_fn(|s| {
            LstmParams::zeros(config.lstm_units[s], config.conv_filters[s])
        });
        Parameters {
            conv,
            lstm,
            dense: DenseParams::zeros(1, config.lstm_units[STAGES - 1]),
        }
    }

    fn glorot(config: &ModelConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut f_in = config.features;
        let mut conv = Vec::with_capacity(STAGES);
        let mut lstm = Vec::with_capacity(STAGES);
        for s in 0..STAGES {
            conv.push(Conv1dParams::glorot(
                config.conv_filters[s],
                config.kernel_width,
                f_in,
                &mut rng,
            ));
            lstm.push(LstmParams::glorot(
                config.lstm_units[s],
                config.conv_filters[s],
                &mut rng,
            ));
            f_in = config.lstm_units[s];
        }
        let dense = DenseParams::glorot(1, config.lstm_units[STAGES - 1], &mut rng);
        Parameters {
            conv: conv.try_into().expect("three stages"),
            lstm: lstm.try_into().expect("three stages"),
            dense,
        }
    }

    /// Parameters in layer order, named `<layer>.<tensor>`.
    pub fn named(&self) -> Vec<ParamRef<'_>> {
        let mut out = Vec::new();
        for s in 0..STAGES {
            for (local, t) in self.conv[s].tensors() {
                out.push(ParamRef {
                    name: format!("{}.{local}", CONV_NAMES[s]),
                    is_bias: is_bias(local),
                    tensor: t,
                });
            }
            for (local, t) in self.lstm[s].tensors() {
                out.push(ParamRef {
                    name: format!("{}.{local}", LSTM_NAMES[s]),
                    is_bias: is_bias(local),
                    tensor: t,
                });
            }
        }
        for (local, t) in self.dense.tensors() {
            out.push(ParamRef {
                name: format!("dense.{local}"),
                is_bias: is_bias(local),
                tensor: t,
            });
        }
        out
    }

    pub fn named_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        let Parameters { conv, lstm, dense } = self;
        for (s, (c, l)) in conv.iter_mut().zip(lstm.iter_mut()).enumerate() {
            for (local, t) in c.tensors_mut() {
                out.push(ParamMut {
                    name: format!("{}.{local}", CONV_NAMES[s]),
                    is_bias: is_bias(local),
                    tensor: t,
                });
            }
            for (local, t) in l.tensors_mut() {
                out.push(ParamMut {
                    name: format!("{}.{local}", LSTM_NAMES[s]),
                    is_bias: is_bias(local),
                    tensor: t,
                });
            }
        }
        for (local, t) in dense.tensors_mut() {
            out.push(ParamMut {
                name: format!("dense.{local}"),
                is_bias: is_bias(local),
                tensor: t,
            });
        }
        out
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.named()
            .into_iter()
            .find(|p| p.name == name)
            .map(|p| p.tensor)
    }

    pub fn count(&self) -> usize {
        self.named().iter().map(|p| p.tensor.len()).sum()
    }

    fn accumulate(&mut self, other: &Parameters) {
        for (dst, src) in self.named_mut().into_iter().zip(other.named()) {
            for (d, s) in dst.tensor.data_mut().iter_mut().zip(src.tensor.data()) {
                *d += s;
            }
        }
    }

    fn scale_in_place(&mut self, factor: f64) {
        for p in self.named_mut() {
            for v in p.tensor.data_mut() {
                *v *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    params: Parameters,
}

struct StageCache {
    conv: Conv1dCache,
    activated: Tensor,
    pool: MaxPoolCache,
    lstm: LstmCache,
    dropout: Option<DropoutCache>,
}

struct SampleCache {
    stages: Vec<StageCache>,
    dense: DenseCache,
}

/// Per-sample caches from a training-mode forward pass.
pub struct BatchCache {
    samples: Vec<SampleCache>,
}

impl BatchCache {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl Model {
    /// Builds the stack with seeded Glorot initialization.
    pub fn build(config: ModelConfig) -> Result<Self> {
        config.stage_lengths()?;
        let params = Parameters::glorot(&config);
        Ok(Model { config, params })
    }

    /// Replaces all parameters; shapes must match the configuration.
    pub fn from_parts(config: ModelConfig, params: Parameters) -> Result<Self> {
        config.stage_lengths()?;
        let expected = Parameters::zeros(&config);
        for (e, p) in expected.named().iter().zip(params.named()) {
            if e.tensor.shape() != p.tensor.shape() {
                return Err(Error::ShapeDisagreement {
                    name: e.name.clone(),
                    expected: e.tensor.shape().to_vec(),
                    found: p.tensor.shape().to_vec(),
                });
            }
        }
        Ok(Model { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters {
        &mut self.params
    }

    pub fn architecture(&self) -> &'static [LayerKind] {
        &ARCHITECTURE
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let want = [self.config.lookback, self.config.features];
        if batch.rank() != 3 || batch.shape()[1..] != want {
            return Err(Error::Dimension {
                op: "model forward",
                lhs: batch.shape().to_vec(),
                rhs: want.to_vec(),
            });
        }
        Ok(batch.shape()[0])
    }

    fn sample(&self, batch: &Tensor, b: usize) -> Result<Tensor> {
        let per = self.config.lookback * self.config.features;
        Tensor::new(
            vec![self.config.lookback, self.config.features],
            batch.data()[b * per..(b + 1) * per].to_vec(),
        )
    }

    fn forward_sample<R: Rng + ?Sized>(
        &self,
        x: Tensor,
        training: bool,
        rng: &mut R,
    ) -> Result<(f64, SampleCache)> {
        let lengths = self.config.stage_lengths()?;
        let mut h = x;
        let mut stages = Vec::with_capacity(STAGES);
        for s in 0..STAGES {
            let (conv_out, conv) = self.params.conv[s].forward(&h)?;
            let activated = conv_out.map_unary(crate::tensor::Activation::Tanh);
            let (pooled, pool) = maxpool1d_forward(&activated, self.config.pool_window)?;
            debug_assert_eq!(conv_out.shape()[0], lengths[s].after_conv);
            debug_assert_eq!(pooled.shape()[0], lengths[s].after_pool);
            let last = s + 1 == STAGES;
            let (seq, lstm) = self.params.lstm[s].forward(&pooled, !last)?;
            let (out, drop) = if last {
                (seq, None)
            } else {
                let (d, c) = dropout(&seq, self.config.dropout_rate, training, rng)?;
                (d, Some(c))
            };
            stages.push(StageCache {
                conv,
                activated,
                pool,
                lstm,
                dropout: drop,
            });
            h = out;
        }
        let (y, dense) = self.params.dense.forward(&h)?;
        Ok((y.data()[0], SampleCache { stages, dense }))
    }

    fn backward_sample(&self, cache: SampleCache, grad: f64) -> Result<Parameters> {
        let mut grads = Parameters::zeros(&self.config);
        let (mut g, dense_grads) = self
            .params
            .dense
            .backward(&Tensor::scalar(grad)?, cache.dense)?;
        grads.dense = dense_grads;
        for (s, stage) in cache.stages.into_iter().enumerate().rev() {
            if let Some(d) = stage.dropout {
                g = dropout_backward(&g, d)?;
            }
            let (g_pool, lstm_grads) = self.params.lstm[s].backward(&g, stage.lstm)?;
            grads.lstm[s] = lstm_grads;
            let g_act = maxpool1d_backward(&g_pool, stage.pool)?;
            let g_conv = Tensor::new(
                g_act.shape().to_vec(),
                g_act
                    .data()
                    .iter()
                    .zip(stage.activated.data())
                    .map(|(g, a)| g * (1.0 - a * a))
                    .collect(),
            )?;
            let (g_in, conv_grads) = self.params.conv[s].backward(&g_conv, stage.conv)?;
            grads.conv[s] = conv_grads;
            g = g_in;
        }
        Ok(grads)
    }

    /// Runs `batch: [B, T, F]` through the stack.
    ///
    /// In training mode dropout is active and per-sample caches are returned.
    /// One `u64` is drawn from `rng` per sample to seed that sample's dropout
    /// stream, so results do not depend on evaluation order.
    pub fn forward<R: RngCore + ?Sized>(
        &self,
        batch: &Tensor,
        training: bool,
        rng: &mut R,
    ) -> Result<(Tensor, Option<BatchCache>)> {
        let n = self.check_batch(batch)?;
        let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
        let mut preds = Vec::with_capacity(n);
        let mut samples = Vec::with_capacity(if training { n } else { 0 });
        for (b, seed) in seeds.into_iter().enumerate() {
            let mut sample_rng = ChaCha8Rng::seed_from_u64(seed);
            let (y, cache) = self.forward_sample(self.sample(batch, b)?, training, &mut sample_rng)?;
            preds.push(y);
            if training {
                samples.push(cache);
            }
        }
        let preds = Tensor::from_vec(preds)?;
        Ok((preds, training.then_some(BatchCache { samples })))
    }

    /// Inference-mode forward pass.
    pub fn predict(&self, batch: &Tensor) -> Result<Tensor> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.forward(batch, false, &mut unused).map(|(p, _)| p)
    }

    /// Parameter gradients averaged over the batch.
    ///
    /// `grad_predictions[b]` is the derivative of sample `b`'s loss with
    /// respect to its prediction; per-sample gradients are summed in
    /// ascending sample order and divided by `B`.
    pub fn backward(&self, caches: BatchCache, grad_predictions: &Tensor) -> Result<Parameters> {
        if caches.is_empty() {
            return Err(Error::CacheMismatch {
                layer: "model",
                detail: "no training-mode caches".into(),
            });
        }
        if grad_predictions.len() != caches.len() {
            return Err(Error::CacheMismatch {
                layer: "model",
                detail: format!(
                    "{} gradients for {} cached samples",
                    grad_predictions.len(),
                    caches.len()
                ),
            });
        }
        let n = caches.len();
        let mut total = Parameters::zeros(&self.config);
        for (cache, &g) in caches.samples.into_iter().zip(grad_predictions.data()) {
            total.accumulate(&self.backward_sample(cache, g)?);
        }
        total.scale_in_place(1.0 / n as f64);
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::testing::random_tensor;

    fn small_config() -> ModelConfig {
        ModelConfig {
            lookback: 16,
            features: 3,
            conv_filters: [4, 5, 3],
            kernel_width: 2,
            pool_window: 2,
            lstm_units: [3, 4, 2],
            dropout_rate: 0.25,
            seed: 5,
        }
    }

    #[test]
    fn default_stage_lengths() {
        let cfg = ModelConfig::default();
        let l = cfg.stage_lengths().unwrap();
        let pairs: Vec<_> = l.iter().map(|s| (s.after_conv, s.after_pool)).collect();
        assert_eq!(pairs, vec![(62, 31), (29, 14), (12, 6)]);
        assert!(Model::build(cfg).is_ok());
    }

    #[test]
    fn collapsing_config_is_rejected() {
        let cfg = ModelConfig {
            lookback: 8,
            ..ModelConfig::default()
        };
        let err = Model::build(cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("stage 2 pool"), "{err}");
    }

    #[test]
    fn build_is_deterministic() {
        let a = Model::build(small_config()).unwrap();
        let b = Model::build(small_config()).unwrap();
        assert_eq!(a, b);
        let c = Model::build(ModelConfig {
            seed: 6,
            ..small_config()
        })
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forget_bias_starts_at_one() {
        let m = Model::build(small_config()).unwrap();
        assert!(m.params().get("lstm2.b_f").unwrap().data().iter().all(|&v| v == 1.0));
        assert!(m.params().get("lstm2.b_i").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn architecture_order() {
        let m = Model::build(small_config()).unwrap();
        let names: Vec<String> = m.architecture().iter().map(|l| l.to_string()).collect();
        assert_eq!(
            names.join(","),
            "Input,Conv1D,MaxPooling1D,LSTM,Dropout,Conv1D,MaxPooling1D,LSTM,Dropout,\
             Conv1D,MaxPooling1D,LSTM,Dense"
        );
        let first_params: Vec<String> =
            m.params().named().iter().map(|p| p.name.clone()).take(3).collect();
        assert_eq!(first_params, ["conv1.kernel", "conv1.bias", "lstm1.w_i"]);
    }

    #[test]
    fn zero_model_predicts_dense_bias() {
        let cfg = small_config();
        let m = Model::from_parts(cfg.clone(), Parameters::zeros(&cfg)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = random_tensor(&[3, 16, 3], &mut rng);
        assert_eq!(m.predict(&batch).unwrap().data(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn inference_is_repeatable_and_per_sample() {
        let m = Model::build(small_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = random_tensor(&[2, 16, 3], &mut rng);
        let p1 = m.predict(&batch).unwrap();
        assert_eq!(p1, m.predict(&batch).unwrap());
        let per = 16 * 3;
        for b in 0..2 {
            let single =
                Tensor::new(vec![1, 16, 3], batch.data()[b * per..(b + 1) * per].to_vec())
                    .unwrap();
            assert_eq!(m.predict(&single).unwrap().data()[0], p1.data()[b]);
        }
    }

    #[test]
    fn batch_shape_checked() {
        let m = Model::build(small_config()).unwrap();
        assert!(matches!(
            m.predict(&Tensor::zeros(&[2, 15, 3])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let m = Model::build(small_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = random_tensor(&[2, 16, 3], &mut rng);
        let (_, cache) = m.forward(&batch, true, &mut rng).unwrap();
        let g = m.backward(cache.unwrap(), &Tensor::zeros(&[2])).unwrap();
        assert!(g.named().iter().all(|p| p.tensor.max_abs() == 0.0));
    }

    #[test]
    fn inference_returns_no_cache() {
        let m = Model::build(small_config()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = random_tensor(&[1, 16, 3], &mut rng);
        assert!(m.forward(&batch, false, &mut rng).unwrap().1.is_none());
    }

    #[test]
    fn batch_gradient_is_mean_of_singles() {
        let cfg = ModelConfig {
            dropout_rate: 0.0,
            ..small_config()
        };
        let m = Model::build(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let batch = random_tensor(&[2, 16, 3], &mut rng);
        let upstream = Tensor::from_vec(vec![0.7, -1.3]).unwrap();

        let (_, cache) = m.forward(&batch, true, &mut rng).unwrap();
        let both = m.backward(cache.unwrap(), &upstream).unwrap();

        let per = 16 * 3;
        let mut singles = Vec::new();
        for b in 0..2 {
            let x = Tensor::new(vec![1, 16, 3], batch.data()[b * per..(b + 1) * per].to_vec())
                .unwrap();
            let (_, cache) = m.forward(&x, true, &mut rng).unwrap();
            let g = Tensor::from_vec(vec![upstream.data()[b]]).unwrap();
            singles.push(m.backward(cache.unwrap(), &g).unwrap());
        }
        for ((pb, p0), p1) in both
            .named()
            .iter()
            .zip(singles[0].named())
            .zip(singles[1].named())
        {
            for ((a, x), y) in pb.tensor.data().iter().zip(p0.tensor.data()).zip(p1.tensor.data()) {
                let mean = 0.5 * (x + y);
                assert!((a - mean).abs() <= 1e-14 * mean.abs().max(1.0), "{}", pb.name);
            }
        }
    }

    #[test]
    fn backward_without_cache_errors() {
        let m = Model::build(small_config()).unwrap();
        let empty = BatchCache { samples: vec![] };
        assert!(m.backward(empty, &Tensor::zeros(&[1])).is_err());
    }

    #[test]
    fn from_parts_rejects_wrong_shapes() {
        let cfg = small_config();
        let mut other = cfg.clone();
        other.lstm_units = [3, 4, 5];
        let err = Model::from_parts(cfg, Parameters::zeros(&other)).unwrap_err();
        assert!(matches!(err, Error::ShapeDisagreement { .. }));
    }
}
