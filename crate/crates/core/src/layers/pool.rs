use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Saved argmax positions of a max-pool forward pass.
#[derive(Debug)]
pub struct MaxPoolCache {
    input_steps: usize,
    channels: usize,
    argmax: Vec<usize>,
}

/// Non-overlapping max pooling over time.
///
/// `x` is `[T, K]`; output is `[T / window, K]` with the trailing remainder
/// dropped. Ties go to the earliest time index.
pub fn maxpool1d_forward(x: &Tensor, window: usize) -> Result<(Tensor, MaxPoolCache)> {
    if window == 0 {
        return Err(Error::InvalidArgument("pool window must be >= 1".into()));
    }
    if x.rank() != 2 {
        return Err(Error::Dimension {
            op: "maxpool1d_forward",
            lhs: x.shape().to_vec(),
            rhs: vec![window],
        });
    }
    let (steps, channels) = (x.shape()[0], x.shape()[1]);
    if steps < window {
        return Err(Error::SequenceTooShort {
            layer: "maxpool1d",
            length: steps,
            required: window,
        });
    }
    let out_steps = steps / window;
    let xd = x.data();
    let mut out = Vec::with_capacity(out_steps * channels);
    let mut argmax = Vec::with_capacity(out_steps * channels);
    for s in 0..out_steps {
        for c in 0..channels {
            let start = s * window;
            let mut best = start;
            for t in start + 1..start + window {
                if xd[t * channels + c] > xd[best * channels + c] {
                    best = t;
                }
            }
            out.push(xd[best * channels + c]);
            argmax.push(best);
        }
    }
    Ok((
        Tensor::new(vec![out_steps, channels], out)?,
        MaxPoolCache {
            input_steps: steps,
            channels,
            argmax,
        },
    ))
}

/// Routes each output gradient back to the input position that won the max.
pub fn maxpool1d_backward(grad_y: &Tensor, cache: MaxPoolCache) -> Result<Tensor> {
    let expected = cache.argmax.len();
    if grad_y.len() != expected || grad_y.shape().last() != Some(&cache.channels) {
        return Err(Error::CacheMismatch {
            layer: "maxpool1d",
            detail: format!(
                "gradient shape {:?} does not match {} pooled cells",
                grad_y.shape(),
                expected
            ),
        });
    }
    let c = cache.channels;
    let mut gx = vec![0.0; cache.input_steps * c];
    for (cell, (&g, &t)) in grad_y.data().iter().zip(&cache.argmax).enumerate() {
        gx[t * c + cell % c] += g;
    }
    Tensor::new(vec![cache.input_steps, c], gx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::testing::{assert_close_grads, numeric_grad, random_tensor};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn column(values: &[f64]) -> Tensor {
        Tensor::new(vec![values.len(), 1], values.to_vec()).unwrap()
    }

    #[test]
    fn pairs() {
        let (y, cache) = maxpool1d_forward(&column(&[3.0, 1.0, 2.0, 5.0]), 2).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        let gx = maxpool1d_backward(&column(&[1.0, 1.0]), cache).unwrap();
        assert_eq!(gx.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn drops_remainder_and_breaks_ties_early() {
        let (y, cache) = maxpool1d_forward(&column(&[1.0; 5]), 2).unwrap();
        assert_eq!(y.data(), &[1.0, 1.0]);
        let gx = maxpool1d_backward(&column(&[2.0, 3.0]), cache).unwrap();
        assert_eq!(gx.data(), &[2.0, 0.0, 3.0, 0.0, 0.0]);
    }

    #[test]
    fn window_one_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&[6, 3], &mut rng);
        let (y, _) = maxpool1d_forward(&x, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_grad_and_errors() {
        let (_, cache) = maxpool1d_forward(&column(&[3.0, 1.0, 2.0, 5.0]), 2).unwrap();
        let gx = maxpool1d_backward(&column(&[0.0, 0.0]), cache).unwrap();
        assert_eq!(gx.max_abs(), 0.0);
        assert!(matches!(
            maxpool1d_forward(&column(&[1.0]), 2),
            Err(Error::SequenceTooShort { .. })
        ));
        let (_, cache) = maxpool1d_forward(&column(&[3.0, 1.0, 2.0, 5.0]), 2).unwrap();
        assert!(matches!(
            maxpool1d_backward(&column(&[1.0, 1.0, 1.0]), cache),
            Err(Error::CacheMismatch { .. })
        ));
    }

    #[test]
    fn finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_tensor(&[9, 3], &mut rng);
        let w = random_tensor(&[3, 3], &mut rng);
        let loss = |xx: &Tensor| {
            let (y, _) = maxpool1d_forward(xx, 3).unwrap();
            y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = maxpool1d_forward(&x, 3).unwrap();
        let gx = maxpool1d_backward(&w, cache).unwrap();
        assert_close_grads(&gx, &numeric_grad(&x, loss), 1e-6);
    }

    proptest! {
        #[test]
        fn output_length_is_floor(steps in 1usize..40, window in 1usize..8) {
            prop_assume!(steps >= window);
            let x = Tensor::new(vec![steps, 2], (0..steps * 2).map(|v| v as f64).collect()).unwrap();
            let (y, _) = maxpool1d_forward(&x, window).unwrap();
            prop_assert_eq!(y.shape(), &[steps / window, 2]);
        }
    }
}
