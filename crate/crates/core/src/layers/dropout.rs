use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-element survivor scale: 0 for dropped cells, 1/(1-rate) for kept ones.
/// `None` when the layer ran as identity.
#[derive(Debug)]
pub struct DropoutCache {
    mask: Option<Vec<f64>>,
    len: usize,
}

/// Inverted dropout. In inference mode (or with `rate == 0`) the input is
/// returned unchanged.
pub fn dropout<R: Rng + ?Sized>(
    x: &Tensor,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> Result<(Tensor, DropoutCache)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {rate} outside [0, 1)"
        )));
    }
    if !training || rate == 0.0 {
        return Ok((
            x.clone(),
            DropoutCache {
                mask: None,
                len: x.len(),
            },
        ));
    }
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..x.len())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Ok((
        Tensor::new(x.shape().to_vec(), data)?,
        DropoutCache {
            mask: Some(mask),
            len: x.len(),
        },
    ))
}

pub fn dropout_backward(grad_y: &Tensor, cache: DropoutCache) -> Result<Tensor> {
    if grad_y.len() != cache.len {
        return Err(Error::CacheMismatch {
            layer: "dropout",
            detail: format!("gradient has {} cells, mask has {}", grad_y.len(), cache.len),
        });
    }
    match cache.mask {
        None => Ok(grad_y.clone()),
        Some(mask) => Tensor::new(
            grad_y.shape().to_vec(),
            grad_y.data().iter().zip(&mask).map(|(g, m)| g * m).collect(),
        ),
    }
}
