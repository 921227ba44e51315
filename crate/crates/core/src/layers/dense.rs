use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, NamedTensors};
use crate::tensor::Tensor;

/// Fully connected linear layer, `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug)]
pub struct DenseCache {
    input: Tensor,
}

impl DenseParams {
    pub fn new(weight: Tensor, bias: Tensor) -> Result<Self> {
        let ws = weight.shape();
        if ws.len() != 2 || bias.shape() != [ws[0]] {
            return Err(Error::Dimension {
                op: "dense params",
                lhs: ws.to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        Ok(DenseParams { weight, bias })
    }

    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        DenseParams {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn glorot<R: Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> Self {
        DenseParams {
            weight: glorot_uniform(&[outputs, inputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, DenseCache)> {
        if x.rank() != 1 || x.len() != self.inputs() {
            return Err(Error::Dimension {
                op: "dense_forward",
                lhs: x.shape().to_vec(),
                rhs: self.weight.shape().to_vec(),
            });
        }
        let xd = x.data();
        let out = (0..self.outputs())
            .map(|o| {
                let row = self.weight.row(o);
                self.bias.data()[o] + row.iter().zip(xd).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect();
        Ok((Tensor::from_vec(out)?, DenseCache { input: x.clone() }))
    }

    pub fn backward(&self, grad_y: &Tensor, cache: DenseCache) -> Result<(Tensor, DenseParams)> {
        if grad_y.len() != self.outputs() || cache.input.len() != self.inputs() {
            return Err(Error::CacheMismatch {
                layer: "dense",
                detail: format!(
                    "gradient {:?} / cached input {:?} vs weight {:?}",
                    grad_y.shape(),
                    cache.input.shape(),
                    self.weight.shape()
                ),
            });
        }
        let (n_out, n_in) = (self.outputs(), self.inputs());
        let xd = cache.input.data();
        let gy = grad_y.data();
        let mut gw = vec![0.0; n_out * n_in];
        let mut gx = vec![0.0; n_in];
        for o in 0..n_out {
            let row = self.weight.row(o);
            for i in 0..n_in {
                gw[o * n_in + i] = gy[o] * xd[i];
                gx[i] += gy[o] * row[i];
            }
        }
        Ok((
            Tensor::from_vec(gx)?,
            DenseParams {
                weight: Tensor::new(vec![n_out, n_in], gw)?,
                bias: grad_y.clone().reshape(vec![n_out])?,
            },
        ))
    }
}

impl NamedTensors for DenseParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![("weight", &self.weight), ("bias", &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        vec![("weight", &mut self.weight), ("bias", &mut self.bias)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::testing::{assert_close_grads, numeric_grad, random_tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_sum() {
        let eye = DenseParams::new(
            Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            Tensor::zeros(&[2]),
        )
        .unwrap();
        let x = Tensor::from_vec(vec![2.5, -1.0]).unwrap();
        assert_eq!(eye.forward(&x).unwrap().0, x);

        let p = DenseParams::new(
            Tensor::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            Tensor::from_vec(vec![1.0]).unwrap(),
        )
        .unwrap();
        let (y, _) = p.forward(&Tensor::from_vec(vec![2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(y.data(), &[6.0]);
    }

    #[test]
    fn shape_errors() {
        let p = DenseParams::zeros(1, 3);
        assert!(matches!(
            p.forward(&Tensor::zeros(&[2])),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = DenseParams::new(random_tensor(&[3, 4], &mut rng), random_tensor(&[3], &mut rng))
            .unwrap();
        let x = random_tensor(&[4], &mut rng);
        let w = random_tensor(&[3], &mut rng);
        let loss = |p: &DenseParams, x: &Tensor| {
            let (y, _) = p.forward(x).unwrap();
            y.data().iter().zip(w.data()).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = p.forward(&x).unwrap();
        let (gx, gp) = p.backward(&w, cache).unwrap();
        assert_close_grads(&gx, &numeric_grad(&x, |xx| loss(&p, xx)), 1e-8);
        let num_w = numeric_grad(&p.weight, |ww| {
            loss(&DenseParams::new(ww.clone(), p.bias.clone()).unwrap(), &x)
        });
        assert_close_grads(&gp.weight, &num_w, 1e-8);
        let num_b = numeric_grad(&p.bias, |bb| {
            loss(&DenseParams::new(p.weight.clone(), bb.clone()).unwrap(), &x)
        });
        assert_close_grads(&gp.bias, &num_b, 1e-8);
    }

    #[test]
    fn linear_without_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = DenseParams::new(random_tensor(&[2, 5], &mut rng), Tensor::zeros(&[2])).unwrap();
        let x = random_tensor(&[5], &mut rng);
        let z = random_tensor(&[5], &mut rng);
        let mix = x.scale(2.0).unwrap().add(&z.scale(-0.5).unwrap()).unwrap();
        let lhs = p.forward(&mix).unwrap().0;
        let fx = p.forward(&x).unwrap().0;
        let fz = p.forward(&z).unwrap().0;
        for i in 0..2 {
            let rhs = 2.0 * fx.data()[i] - 0.5 * fz.data()[i];
            assert!((lhs.data()[i] - rhs).abs() < 1e-12);
        }
    }
}
