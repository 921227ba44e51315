//! Loss, learning-rate schedule and the two parameter update rules.

use crate::error::{Error, Result};
use crate::model::Parameters;
use crate::tensor::Tensor;

fn check_pair(pred: &Tensor, target: &Tensor) -> Result<usize> {
    if pred.len() != target.len() {
        return Err(Error::Dimension {
            op: "mse",
            lhs: pred.shape().to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument("mse of an empty batch".into()));
    }
    Ok(pred.len())
}

/// Mean squared error `(1/B) Σ (pred - target)²`.
pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    let n = check_pair(pred, target)?;
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n as f64)
}

/// `(2/B)(pred - target)`.
pub fn mse_grad(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    let n = check_pair(pred, target)?;
    let k = 2.0 / n as f64;
    Tensor::new(
        pred.shape().to_vec(),
        pred.data()
            .iter()
            .zip(target.data())
            .map(|(p, t)| k * (p - t))
            .collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimConfig {
    pub optimizer: OptimizerKind,
    pub lr0: f64,
    pub decay_factor: f64,
    pub decay_every: usize,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            optimizer: OptimizerKind::Sgd,
            lr0: 0.05,
            decay_factor: 0.96,
            decay_every: 5,
            l2: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        // lr0 = 0 is allowed for frozen-parameter runs.
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!("lr0 must be >= 0, got {}", self.lr0)));
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must lie in (0, 1], got {}",
                self.decay_factor
            )));
        }
        if self.decay_every == 0 {
            return Err(Error::Config("decay_every must be >= 1".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 must be >= 0, got {}", self.l2)));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.beta1) || !unit(self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("adam betas must lie in [0, 1) and eps > 0".into()));
        }
        Ok(())
    }
}

/// Step decay: `lr0 · γ^floor(epoch / decay_every)`.
pub fn schedule_lr(epoch: usize, cfg: &OptimConfig) -> f64 {
    let steps = (epoch / cfg.decay_every.max(1)) as i32;
    cfg.lr0 * cfg.decay_factor.powi(steps)
}

fn check_shapes(params: &Parameters, grads: &Parameters) -> Result<()> {
    for (p, g) in params.named().iter().zip(grads.named()) {
        if p.tensor.shape() != g.tensor.shape() {
            return Err(Error::ShapeDisagreement {
                name: p.name.clone(),
                expected: p.tensor.shape().to_vec(),
                found: g.tensor.shape().to_vec(),
            });
        }
    }
    Ok(())
}

fn check_updated(params: &Parameters) -> Result<()> {
    if params
        .named()
        .iter()
        .all(|p| p.tensor.data().iter().all(|v| v.is_finite()))
    {
        Ok(())
    } else {
        Err(Error::NonFinite("optimizer step"))
    }
}

/// `w ← w − lr·(g + λ·w)` for weights, `b ← b − lr·g` for biases.
pub fn sgd_step(params: &mut Parameters, grads: &Parameters, lr: f64, l2: f64) -> Result<()> {
    check_shapes(params, grads)?;
    for (p, g) in params.named_mut().into_iter().zip(grads.named()) {
        let decay = if p.is_bias { 0.0 } else { l2 };
        for (w, &gw) in p.tensor.data_mut().iter_mut().zip(g.tensor.data()) {
            *w -= lr * (gw + decay * *w);
        }
    }
    check_updated(params)
}

/// Adam moments, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &Parameters) -> Self {
        let zeros: Vec<Tensor> = params.named().iter().map(|p| p.tensor.zeros_like()).collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Adam with bias correction; L2 is folded into the gradient before the
/// moment update and skipped for biases.
pub fn adam_step(
    params: &mut Parameters,
    grads: &Parameters,
    state: &mut AdamState,
    lr: f64,
    l2: f64,
    cfg: &OptimConfig,
) -> Result<()> {
    check_shapes(params, grads)?;
    if state.m.len() != params.named().len() {
        return Err(Error::InvalidArgument(
            "adam state does not match parameter set".into(),
        ));
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (idx, (p, g)) in params.named_mut().into_iter().zip(grads.named()).enumerate() {
        let decay = if p.is_bias { 0.0 } else { l2 };
        let m = state.m[idx].data_mut();
        let v = state.v[idx].data_mut();
        for (i, w) in p.tensor.data_mut().iter_mut().enumerate() {
            let gi = g.tensor.data()[i] + decay * *w;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    check_updated(params)
}

/// The configured update rule plus whatever state it carries.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: OptimConfig,
    adam: Option<AdamState>,
}

impl Optimizer {
    pub fn new(cfg: OptimConfig, params: &Parameters) -> Result<Self> {
        cfg.validate()?;
        let adam = (cfg.optimizer == OptimizerKind::Adam).then(|| AdamState::new(params));
        Ok(Optimizer { cfg, adam })
    }

    pub fn config(&self) -> &OptimConfig {
        &self.cfg
    }

    pub fn lr(&self, epoch: usize) -> f64 {
        schedule_lr(epoch, &self.cfg)
    }

    pub fn step(&mut self, params: &mut Parameters, grads: &Parameters, epoch: usize) -> Result<()> {
        let lr = self.lr(epoch);
        match &mut self.adam {
            None => sgd_step(params, grads, lr, self.cfg.l2),
            Some(state) => adam_step(params, grads, state, lr, self.cfg.l2, &self.cfg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> Tensor {
        Tensor::from_vec(values.to_vec()).unwrap()
    }

    /// A one-layer parameter set small enough to reason about by hand.
    fn tiny() -> Parameters {
        Parameters::zeros(&ModelConfig {
            lookback: 1,
            features: 1,
            conv_filters: [1, 1, 1],
            kernel_width: 1,
            pool_window: 1,
            lstm_units: [1, 1, 1],
            dropout_rate: 0.0,
            seed: 0,
        })
    }

    fn fill(p: &mut Parameters, value: f64) {
        for t in p.named_mut() {
            t.tensor.data_mut().fill(value);
        }
    }

    fn first_weight(p: &Parameters) -> f64 {
        p.get("conv1.kernel").unwrap().data()[0]
    }

    fn first_bias(p: &Parameters) -> f64 {
        p.get("conv1.bias").unwrap().data()[0]
    }

    #[test]
    fn mse_values() {
        assert_eq!(mse(&v(&[1.0, 2.0]), &v(&[1.0, 2.0])).unwrap(), 0.0);
        assert_eq!(mse(&v(&[0.0, 0.0]), &v(&[1.0, 1.0])).unwrap(), 1.0);
        assert_eq!(mse(&v(&[2.0, 4.0]), &v(&[1.0, 1.0])).unwrap(), 5.0);
        assert!(mse(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn mse_grad_values() {
        assert_eq!(mse_grad(&v(&[3.0]), &v(&[1.0])).unwrap().data(), &[4.0]);
        assert_eq!(mse_grad(&v(&[1.0, 5.0]), &v(&[1.0, 5.0])).unwrap().data(), &[0.0, 0.0]);

        let pred = v(&[0.3, -1.2, 2.5]);
        let target = v(&[0.1, 0.4, 2.0]);
        let g = mse_grad(&pred, &target).unwrap();
        let mut probe = pred.clone();
        for i in 0..3 {
            let n = crate::gradcheck::central_difference(&mut probe, i, 1e-6, |p| {
                mse(p, &target).unwrap()
            });
            assert!((n - g.data()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn schedule() {
        let cfg = OptimConfig {
            lr0: 0.01,
            decay_factor: 0.5,
            decay_every: 10,
            ..Default::default()
        };
        assert_eq!(schedule_lr(0, &cfg), 0.01);
        assert!((schedule_lr(25, &cfg) - 0.0025).abs() < 1e-18);
        let flat = OptimConfig {
            decay_factor: 1.0,
            ..cfg
        };
        assert!((0..100).all(|e| schedule_lr(e, &flat) == 0.01));
    }

    #[test]
    fn sgd_updates() {
        let mut p = tiny();
        let mut g = tiny();
        fill(&mut p, 1.0);
        sgd_step(&mut p, &g, 0.1, 0.0).unwrap();
        assert_eq!(first_weight(&p), 1.0);

        fill(&mut g, 0.5);
        sgd_step(&mut p, &g, 0.1, 0.0).unwrap();
        assert!((first_weight(&p) - 0.95).abs() < 1e-15);

        let mut p = tiny();
        fill(&mut p, 1.0);
        sgd_step(&mut p, &tiny(), 0.1, 0.1).unwrap();
        assert!((first_weight(&p) - 0.99).abs() < 1e-15);
        assert_eq!(first_bias(&p), 1.0, "biases are exempt from L2");
    }

    #[test]
    fn sgd_reduces_quadratic() {
        // L(w) = ½(w − a)², dL/dw = w − a.
        let a = 3.0;
        let mut p = tiny();
        fill(&mut p, -1.0);
        let mut g = tiny();
        fill(&mut g, -1.0 - a);
        let before = 0.5 * (first_weight(&p) - a).powi(2);
        sgd_step(&mut p, &g, 0.5, 0.0).unwrap();
        let after = 0.5 * (first_weight(&p) - a).powi(2);
        assert!(after < before);
    }

    #[test]
    fn adam_first_step() {
        let cfg = OptimConfig {
            optimizer: OptimizerKind::Adam,
            ..Default::default()
        };
        let mut p = tiny();
        let mut g = tiny();
        fill(&mut g, 1.0);
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &g, &mut state, 0.001, 0.0, &cfg).unwrap();
        let expected = -0.001 / (1.0 + 1e-8);
        assert!((first_weight(&p) - expected).abs() < 1e-15);

        let mut p = tiny();
        let mut state = AdamState::new(&p);
        adam_step(&mut p, &tiny(), &mut state, 0.001, 0.0, &cfg).unwrap();
        assert_eq!(first_weight(&p), 0.0);
    }

    #[test]
    fn adam_is_scale_invariant_on_equal_magnitudes() {
        // Two coordinates seeing gradients g and 10g (same sign pattern) move identically.
        let cfg = OptimConfig {
            optimizer: OptimizerKind::Adam,
            eps: 1e-12,
            ..Default::default()
        };
        let mut a = tiny();
        let mut b = tiny();
        let mut sa = AdamState::new(&a);
        let mut sb = AdamState::new(&b);
        for step in 0..10 {
            let gval = if step % 3 == 0 { 0.2 } else { 0.5 };
            let mut ga = tiny();
            let mut gb = tiny();
            fill(&mut ga, gval);
            fill(&mut gb, 10.0 * gval);
            adam_step(&mut a, &ga, &mut sa, 0.01, 0.0, &cfg).unwrap();
            adam_step(&mut b, &gb, &mut sb, 0.01, 0.0, &cfg).unwrap();
        }
        assert!((first_weight(&a) - first_weight(&b)).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(OptimConfig { decay_factor: 0.0, ..Default::default() }.validate().is_err());
        assert!(OptimConfig { decay_every: 0, ..Default::default() }.validate().is_err());
        assert!(OptimConfig { l2: -1.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn schedule_non_increasing(lr0 in 1e-5f64..1.0, gamma in 0.01f64..=1.0, every in 1usize..20) {
            let cfg = OptimConfig { lr0, decay_factor: gamma, decay_every: every, ..Default::default() };
            prop_assert_eq!(schedule_lr(0, &cfg), lr0);
            for e in 0..60 {
                prop_assert!(schedule_lr(e + 1, &cfg) <= schedule_lr(e, &cfg));
            }
        }

        #[test]
        fn sgd_linear_in_lr(w in -3.0f64..3.0, gv in -3.0f64..3.0, lr in 0.0f64..1.0) {
            let mut p1 = tiny();
            let mut p2 = tiny();
            let mut g = tiny();
            fill(&mut p1, w);
            fill(&mut p2, w);
            fill(&mut g, gv);
            sgd_step(&mut p1, &g, lr, 0.0).unwrap();
            sgd_step(&mut p2, &g, 2.0 * lr, 0.0).unwrap();
            let d1 = first_weight(&p1) - w;
            let d2 = first_weight(&p2) - w;
            prop_assert!((d2 - 2.0 * d1).abs() <= 1e-12);
        }

        #[test]
        fn adam_first_step_bounded(gv in prop_oneof![-1e3f64..-1e-6, 1e-6f64..1e3], lr in 1e-5f64..0.1) {
            let cfg = OptimConfig { optimizer: OptimizerKind::Adam, ..Default::default() };
            let mut p = tiny();
            let mut g = tiny();
            fill(&mut g, gv);
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &g, &mut s, lr, 0.0, &cfg).unwrap();
            prop_assert!(first_weight(&p).abs() <= lr * (1.0 + 1e-9));
        }
    }
}
