//! Finite-difference verification of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::layers::{
    dropout, dropout_backward, maxpool1d_backward, maxpool1d_forward, Conv1dParams, DenseParams,
    LstmParams, NamedTensors,
};
use crate::model::{Model, ModelConfig};
use crate::optim::mse;
use crate::tensor::Tensor;

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_TOLERANCE: f64 = 1e-5;

/// Gradients smaller than this are compared absolutely: with `ε = 1e-6` the
/// central difference itself carries ~1e-10 of rounding noise, so a purely
/// relative measure on a 1e-7 gradient reports noise rather than error.
pub const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, RELATIVE_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR);
    (analytic - numeric).abs() / denom
}

/// `(f(x + e·u_i) - f(x - e·u_i)) / 2e`, restoring `probe[i]` afterwards.
pub fn central_difference(
    probe: &mut Tensor,
    i: usize,
    eps: f64,
    f: impl Fn(&Tensor) -> f64,
) -> f64 {
    let orig = probe.data()[i];
    probe.data_mut()[i] = orig + eps;
    let plus = f(probe);
    probe.data_mut()[i] = orig - eps;
    let minus = f(probe);
    probe.data_mut()[i] = orig;
    (plus - minus) / (2.0 * eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamError {
    pub name: String,
    pub max_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub label: String,
    pub params: Vec<ParamError>,
}

impl GradCheckReport {
    pub fn max_relative_error(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.max_relative_error)
            .fold(0.0, f64::max)
    }

    pub fn failures(&self, tolerance: f64) -> Vec<&ParamError> {
        self.params
            .iter()
            .filter(|p| !(p.max_relative_error < tolerance))
            .collect()
    }
}

/// Knobs for [`check_model`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    /// Seed of the dropout stream, held fixed across every evaluation.
    pub dropout_seed: u64,
    /// Negative control: scale the analytic gradient of the first parameter
    /// tensor by `1 + corrupt` before comparing.
    pub corrupt: Option<f64>,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: DEFAULT_EPSILON,
            dropout_seed: 0,
            corrupt: None,
        }
    }
}

fn train_loss(model: &Model, batch: &Tensor, targets: &Tensor, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pred, _) = model.forward(batch, true, &mut rng)?;
    mse(&pred, targets)
}

/// Compares analytic MSE gradients of every parameter against central
/// differences. Dropout masks are identical in every evaluation.
pub fn check_model(
    model: &Model,
    batch: &Tensor,
    targets: &Tensor,
    opts: GradCheckOptions,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.dropout_seed);
    let (pred, cache) = model.forward(batch, true, &mut rng)?;
    // Per-sample loss derivative; backward averages over the batch.
    let upstream = pred.sub(targets)?.scale(2.0)?;
    let mut grads = model.backward(cache.expect("training mode"), &upstream)?;
    if let Some(c) = opts.corrupt {
        if let Some(first) = grads.named_mut().into_iter().next() {
            for v in first.tensor.data_mut() {
                *v *= 1.0 + c;
            }
        }
    }

    let mut probe_model = model.clone();
    let mut report = Vec::new();
    let names: Vec<String> = model.params().named().iter().map(|p| p.name.clone()).collect();
    for (idx, name) in names.iter().enumerate() {
        let analytic = grads.named()[idx].tensor.clone();
        let len = analytic.len();
        let mut worst = 0.0f64;
        for i in 0..len {
            let numeric = {
                let eval = |m: &Model| train_loss(m, batch, targets, opts.dropout_seed);
                let orig = probe_model.params().named()[idx].tensor.data()[i];
                set_param(&mut probe_model, idx, i, orig + opts.epsilon);
                let plus = eval(&probe_model)?;
                set_param(&mut probe_model, idx, i, orig - opts.epsilon);
                let minus = eval(&probe_model)?;
                set_param(&mut probe_model, idx, i, orig);
                (plus - minus) / (2.0 * opts.epsilon)
            };
            worst = worst.max(relative_error(analytic.data()[i], numeric));
        }
        report.push(ParamError {
            name: name.clone(),
            max_relative_error: worst,
        });
    }
    Ok(GradCheckReport {
        label: "full stack".into(),
        params: report,
    })
}

fn set_param(model: &mut Model, idx: usize, i: usize, value: f64) {
    model.params_mut().named_mut()[idx].tensor.data_mut()[i] = value;
}

/// The small instance used by the CLI and the acceptance suite:
/// `B = 2, T = 16, F = 3`.
pub fn small_instance(seed: u64) -> (Model, Tensor, Tensor) {
    let config = ModelConfig {
        lookback: 16,
        features: 3,
        conv_filters: [4, 5, 4],
        kernel_width: 2,
        pool_window: 2,
        lstm_units: [4, 3, 3],
        dropout_rate: 0.2,
        seed,
    };
    let model = Model::build(config).expect("small config is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let batch = random(&[2, 16, 3], &mut rng);
    let targets = random(&[2], &mut rng);
    (model, batch, targets)
}

fn random<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    t
}

fn weighted(y: &Tensor, w: &Tensor) -> f64 {
    y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum()
}

/// Checks one parameter tensor (or the input) of a layer against central
/// differences of `loss`.
fn compare(
    name: &str,
    analytic: &Tensor,
    base: &Tensor,
    eps: f64,
    loss: impl Fn(&Tensor) -> f64,
) -> ParamError {
    let mut probe = base.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        let n = central_difference(&mut probe, i, eps, &loss);
        worst = worst.max(relative_error(analytic.data()[i], n));
    }
    ParamError {
        name: name.to_string(),
        max_relative_error: worst,
    }
}

/// Per-layer checks on seeded random instances with a random linear loss
/// `L = <w, layer(x)>`.
pub fn check_layers(seed: u64, eps: f64) -> Result<Vec<GradCheckReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    // Conv1D
    {
        let p = Conv1dParams::new(random(&[4, 3, 3], &mut rng), random(&[4], &mut rng))?;
        let x = random(&[16, 3], &mut rng);
        let w = random(&[14, 4], &mut rng);
        let (_, cache) = p.forward(&x)?;
        let (gx, gp) = p.backward(&w, cache)?;
        let loss = |p: &Conv1dParams, x: &Tensor| weighted(&p.forward(x).unwrap().0, &w);
        reports.push(GradCheckReport {
            label: "Conv1D".into(),
            params: vec![
                compare("input", &gx, &x, eps, |xx| loss(&p, xx)),
                compare("kernel", &gp.kernels, &p.kernels, eps, |k| {
                    loss(&Conv1dParams::new(k.clone(), p.bias.clone()).unwrap(), &x)
                }),
                compare("bias", &gp.bias, &p.bias, eps, |b| {
                    loss(&Conv1dParams::new(p.kernels.clone(), b.clone()).unwrap(), &x)
                }),
            ],
        });
    }

    // MaxPooling1D (continuous random input, so maxima are unique)
    {
        let x = random(&[16, 3], &mut rng);
        let w = random(&[8, 3], &mut rng);
        let (_, cache) = maxpool1d_forward(&x, 2)?;
        let gx = maxpool1d_backward(&w, cache)?;
        reports.push(GradCheckReport {
            label: "MaxPooling1D".into(),
            params: vec![compare("input", &gx, &x, eps, |xx| {
                weighted(&maxpool1d_forward(xx, 2).unwrap().0, &w)
            })],
        });
    }

    // LSTM, both output modes
    for return_sequence in [true, false] {
        let (steps, hidden, f_in) = (8, 4, 3);
        let p = LstmParams {
            w: std::array::from_fn(|_| random(&[hidden, f_in], &mut rng)),
            u: std::array::from_fn(|_| random(&[hidden, hidden], &mut rng)),
            b: std::array::from_fn(|_| random(&[hidden], &mut rng)),
        };
        let x = random(&[steps, f_in], &mut rng);
        let out_shape: Vec<usize> = if return_sequence {
            vec![steps, hidden]
        } else {
            vec![hidden]
        };
        let w = random(&out_shape, &mut rng);
        let (_, cache) = p.forward(&x, return_sequence)?;
        let (gx, gp) = p.backward(&w, cache)?;
        let loss =
            |p: &LstmParams, x: &Tensor| weighted(&p.forward(x, return_sequence).unwrap().0, &w);
        let mut params = vec![compare("input", &gx, &x, eps, |xx| loss(&p, xx))];
        let analytic = gp.tensors();
        for (idx, (name, base)) in p.tensors().into_iter().enumerate() {
            params.push(compare(name, analytic[idx].1, base, eps, |t| {
                let mut q = p.clone();
                *q.tensors_mut()[idx].1 = t.clone();
                loss(&q, &x)
            }));
        }
        reports.push(GradCheckReport {
            label: if return_sequence {
                "LSTM(sequence)".into()
            } else {
                "LSTM(last)".into()
            },
            params,
        });
    }

    // Dropout with a fixed mask
    {
        let x = random(&[8, 4], &mut rng);
        let w = random(&[8, 4], &mut rng);
        let mask_seed: u64 = rng.gen();
        let run = |xx: &Tensor| {
            let mut r = ChaCha8Rng::seed_from_u64(mask_seed);
            dropout(xx, 0.3, true, &mut r).unwrap()
        };
        let (_, cache) = run(&x);
        let gx = dropout_backward(&w, cache)?;
        reports.push(GradCheckReport {
            label: "Dropout".into(),
            params: vec![compare("input", &gx, &x, eps, |xx| weighted(&run(xx).0, &w))],
        });
    }

    // Dense
    {
        let p = DenseParams::new(random(&[1, 5], &mut rng), random(&[1], &mut rng))?;
        let x = random(&[5], &mut rng);
        let w = random(&[1], &mut rng);
        let (_, cache) = p.forward(&x)?;
        let (gx, gp) = p.backward(&w, cache)?;
        let loss = |p: &DenseParams, x: &Tensor| weighted(&p.forward(x).unwrap().0, &w);
        reports.push(GradCheckReport {
            label: "Dense".into(),
            params: vec![
                compare("input", &gx, &x, eps, |xx| loss(&p, xx)),
                compare("weight", &gp.weight, &p.weight, eps, |ww| {
                    loss(&DenseParams::new(ww.clone(), p.bias.clone()).unwrap(), &x)
                }),
                compare("bias", &gp.bias, &p.bias, eps, |bb| {
                    loss(&DenseParams::new(p.weight.clone(), bb.clone()).unwrap(), &x)
                }),
            ],
        });
    }

    Ok(reports)
}

/// Per-layer checks followed by the full stack on [`small_instance`].
pub fn run_all(seed: u64, opts: GradCheckOptions) -> Result<Vec<GradCheckReport>> {
    let mut reports = check_layers(seed, opts.epsilon)?;
    let (model, batch, targets) = small_instance(seed);
    reports.push(check_model(&model, &batch, &targets, opts)?);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(1.0, 1.0), 0.0);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((relative_error(0.0, 1e-9) - 1e-5).abs() < 1e-15);
    }

    #[test]
    fn layers_pass() {
        for r in check_layers(3, DEFAULT_EPSILON).unwrap() {
            assert!(
                r.max_relative_error() < DEFAULT_TOLERANCE,
                "{}: {:?}",
                r.label,
                r.params
            );
        }
    }

    #[test]
    fn full_stack_passes_and_is_repeatable() {
        let (model, batch, targets) = small_instance(1);
        let a = check_model(&model, &batch, &targets, GradCheckOptions::default()).unwrap();
        assert!(a.max_relative_error() < DEFAULT_TOLERANCE, "{:?}", a.params);
        let b = check_model(&model, &batch, &targets, GradCheckOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corruption_is_detected() {
        let (model, batch, targets) = small_instance(1);
        let opts = GradCheckOptions {
            corrupt: Some(1e-2),
            ..Default::default()
        };
        let r = check_model(&model, &batch, &targets, opts).unwrap();
        assert!(r.failures(DEFAULT_TOLERANCE).iter().any(|p| p.name == "conv1.kernel"));
    }

    #[test]
    fn quadratic_case_is_near_exact() {
        // Dense layer under MSE is quadratic in its parameters, so central
        // differences are exact up to rounding.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = DenseParams::new(random(&[1, 6], &mut rng), random(&[1], &mut rng)).unwrap();
        let x = random(&[6], &mut rng);
        let target = Tensor::from_vec(vec![3.0]).unwrap();
        let loss = |p: &DenseParams| mse(&p.forward(&x).unwrap().0, &target).unwrap();
        let (y, cache) = p.forward(&x).unwrap();
        let (_, gp) = p.backward(&y.sub(&target).unwrap().scale(2.0).unwrap(), cache).unwrap();
        let err = compare("weight", &gp.weight, &p.weight, DEFAULT_EPSILON, |w| {
            loss(&DenseParams::new(w.clone(), p.bias.clone()).unwrap())
        });
        assert!(err.max_relative_error < 1e-8, "{err:?}");
    }

    #[test]
    fn degenerate_width_one_stack() {
        let config = ModelConfig {
            lookback: 6,
            features: 2,
            conv_filters: [2, 2, 2],
            kernel_width: 1,
            pool_window: 1,
            lstm_units: [2, 2, 2],
            dropout_rate: 0.0,
            seed: 8,
        };
        let model = Model::build(config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let batch = random(&[2, 6, 2], &mut rng);
        let targets = random(&[2], &mut rng);
        let r = check_model(&model, &batch, &targets, GradCheckOptions::default()).unwrap();
        assert!(r.max_relative_error() < DEFAULT_TOLERANCE, "{:?}", r.params);
    }
}
