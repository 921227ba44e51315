//! Forward and backward passes for the layer types in the stack.
//!
//! Every layer works on a single sample: sequences are `[T, features]`,
//! the dense layer takes a flat vector. Forward passes return a cache that
//! the matching backward pass consumes by value.

mod conv;
mod dense;
mod dropout;
mod lstm;
mod pool;

pub use conv::{Conv1dCache, Conv1dParams};
pub use dense::{DenseCache, DenseParams};
pub use dropout::{dropout, dropout_backward, DropoutCache};
pub use lstm::{LstmCache, LstmParams, GATES};
pub use pool::{maxpool1d_backward, maxpool1d_forward, MaxPoolCache};

use rand::Rng;

use crate::tensor::Tensor;

/// Stable names for a layer's parameter tensors, in serialization order.
pub trait NamedTensors {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)>;
}

/// Uniform on `[-sqrt(6 / (fan_in + fan_out)), +sqrt(...)]`.
pub fn glorot_uniform<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-bound..bound);
    }
    t
}
