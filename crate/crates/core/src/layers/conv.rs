use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, NamedTensors};
use crate::tensor::Tensor;

/// 1-D convolution over time, valid padding, stride 1.
///
/// `kernels` is `[filters, width, in_features]`, `bias` is `[filters]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1dParams {
    pub kernels: Tensor,
    pub bias: Tensor,
}

#[derive(Debug)]
pub struct Conv1dCache {
    input: Tensor,
    kernel_shape: Vec<usize>,
}

impl Conv1dParams {
    pub fn new(kernels: Tensor, bias: Tensor) -> Result<Self> {
        let ks = kernels.shape();
        if ks.len() != 3 || bias.shape() != [ks[0]] {
            return Err(Error::Dimension {
                op: "conv1d params",
                lhs: ks.to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        Ok(Conv1dParams { kernels, bias })
    }

    pub fn zeros(filters: usize, width: usize, in_features: usize) -> Self {
        Conv1dParams {
            kernels: Tensor::zeros(&[filters, width, in_features]),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn glorot<R: Rng + ?Sized>(
        filters: usize,
        width: usize,
        in_features: usize,
        rng: &mut R,
    ) -> Self {
        let kernels = glorot_uniform(
            &[filters, width, in_features],
            width * in_features,
            width * filters,
            rng,
        );
        Conv1dParams {
            kernels,
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn in_features(&self) -> usize {
        self.kernels.shape()[2]
    }

    /// `x` is `[T, in_features]`; output is `[T - width + 1, filters]`.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, Conv1dCache)> {
        let (k_out, width, f_in) = (self.filters(), self.width(), self.in_features());
        if x.rank() != 2 || x.shape()[1] != f_in {
            return Err(Error::Dimension {
                op: "conv1d_forward",
                lhs: x.shape().to_vec(),
                rhs: self.kernels.shape().to_vec(),
            });
        }
        let steps = x.shape()[0];
        if steps < width {
            return Err(Error::SequenceTooShort {
                layer: "conv1d",
                length: steps,
                required: width,
            });
        }
        let out_steps = steps - width + 1;
        let xd = x.data();
        let kd = self.kernels.data();
        let bd = self.bias.data();
        let span = width * f_in;
        let mut out = vec![0.0; out_steps * k_out];
        for t in 0..out_steps {
            // Rows t..t+width are contiguous in row-major layout.
            let patch = &xd[t * f_in..t * f_in + span];
            for k in 0..k_out {
                let kernel = &kd[k * span..(k + 1) * span];
                let acc: f64 = kernel.iter().zip(patch).map(|(a, b)| a * b).sum();
                out[t * k_out + k] = bd[k] + acc;
            }
        }
        let y = Tensor::new(vec![out_steps, k_out], out)?;
        Ok((
            y,
            Conv1dCache {
                input: x.clone(),
                kernel_shape: self.kernels.shape().to_vec(),
            },
        ))
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(&self, grad_y: &Tensor, cache: Conv1dCache) -> Result<(Tensor, Conv1dParams)> {
        let (k_out, width, f_in) = (self.filters(), self.width(), self.in_features());
        if cache.kernel_shape != self.kernels.shape() {
            return Err(Error::CacheMismatch {
                layer: "conv1d",
                detail: format!(
                    "cache built for kernels {:?}, params are {:?}",
                    cache.kernel_shape,
                    self.kernels.shape()
                ),
            });
        }
        let steps = cache.input.shape()[0];
        let out_steps = steps - width + 1;
        if grad_y.shape() != [out_steps, k_out] {
            return Err(Error::CacheMismatch {
                layer: "conv1d",
                detail: format!(
                    "gradient shape {:?}, expected {:?}",
                    grad_y.shape(),
                    [out_steps, k_out]
                ),
            });
        }
        let span = width * f_in;
        let xd = cache.input.data();
        let kd = self.kernels.data();
        let gy = grad_y.data();
        let mut gx = vec![0.0; steps * f_in];
        let mut gk = vec![0.0; k_out * span];
        let mut gb = vec![0.0; k_out];
        for t in 0..out_steps {
            let patch = &xd[t * f_in..t * f_in + span];
            let gpatch = &mut gx[t * f_in..t * f_in + span];
            for k in 0..k_out {
                let g = gy[t * k_out + k];
                if g == 0.0 {
                    continue;
                }
                gb[k] += g;
                let kernel = &kd[k * span..(k + 1) * span];
                let gkernel = &mut gk[k * span..(k + 1) * span];
                for j in 0..span {
                    gkernel[j] += g * patch[j];
                    gpatch[j] += g * kernel[j];
                }
            }
        }
        Ok((
            Tensor::new(vec![steps, f_in], gx)?,
            Conv1dParams {
                kernels: Tensor::new(vec![k_out, width, f_in], gk)?,
                bias: Tensor::new(vec![k_out], gb)?,
            },
        ))
    }
}

impl NamedTensors for Conv1dParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("kernel", &self.kernels), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("kernel", &mut self.kernels), ("bias", &mut self.bias)]
    }
}
