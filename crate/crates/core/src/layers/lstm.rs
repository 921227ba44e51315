use rand::Rng;

use crate::error::{Error, Result};
use crate::layers::{glorot_uniform, NamedTensors};
use crate::tensor::{sigmoid, Tensor};

/// Gate order used for every per-gate array: input, forget, output, candidate.
pub const GATES: [&str; 4] = ["i", "f", "o", "g"];
const I: usize = 0;
const F: usize = 1;
const O: usize = 2;
const G: usize = 3;

/// Four-gate LSTM cell parameters.
///
/// `w[gate]` is `[H, F_in]`, `u[gate]` is `[H, H]`, `b[gate]` is `[H]`, with
/// gates ordered as in [`GATES`].
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w: [Tensor; 4],
    pub u: [Tensor; 4],
    pub b: [Tensor; 4],
}

/// Everything BPTT needs from the forward pass.
#[derive(Debug)]
pub struct LstmCache {
    input: Tensor,
    return_sequence: bool,
    hidden: usize,
    /// h_0..h_T and c_0..c_T, `(T + 1) * H` each.
    h: Vec<f64>,
    c: Vec<f64>,
    /// Post-activation gate values per step, `T * H` each.
    gates: [Vec<f64>; 4],
    tanh_c: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(hidden: usize, in_features: usize) -> Self {
        LstmParams {
            w: std::array::from_fn(|_| Tensor::zeros(&[hidden, in_features])),
            u: std::array::from_fn(|_| Tensor::zeros(&[hidden, hidden])),
            b: std::array::from_fn(|_| Tensor::zeros(&[hidden])),
        }
    }

    /// Glorot-uniform weights, zero biases except the forget gate at 1.0.
    pub fn glorot<R: Rng + ?Sized>(hidden: usize, in_features: usize, rng: &mut R) -> Self {
        let w = std::array::from_fn(|_| {
            glorot_uniform(&[hidden, in_features], in_features, hidden, rng)
        });
        let u = std::array::from_fn(|_| glorot_uniform(&[hidden, hidden], hidden, hidden, rng));
        let mut b: [Tensor; 4] = std::array::from_fn(|_| Tensor::zeros(&[hidden]));
        b[F].data_mut().fill(1.0);
        LstmParams { w, u, b }
    }

    pub fn validate(&self) -> Result<()> {
        let hidden = self.hidden();
        let f_in = self.in_features();
        for g in 0..4 {
            let bad = self.w[g].shape() != [hidden, f_in]
                || self.u[g].shape() != [hidden, hidden]
                || self.b[g].shape() != [hidden];
            if bad {
                return Err(Error::Dimension {
                    op: "lstm params",
                    lhs: self.w[g].shape().to_vec(),
                    rhs: self.u[g].shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    pub fn hidden(&self) -> usize {
        self.w[0].shape()[0]
    }

    pub fn in_features(&self) -> usize {
        self.w[0].shape()[1]
    }

    /// Runs the recurrence from zero state over `x: [T, F_in]`.
    ///
    /// Returns `[T, H]` when `return_sequence`, otherwise the final state `[H]`.
    pub fn forward(&self, x: &Tensor, return_sequence: bool) -> Result<(Tensor, LstmCache)> {
        let hidden = self.hidden();
        let f_in = self.in_features();
        if x.rank() != 2 || x.shape()[1] != f_in {
            return Err(Error::Dimension {
                op: "lstm_forward",
                lhs: x.shape().to_vec(),
                rhs: self.w[0].shape().to_vec(),
            });
        }
        let steps = x.shape()[0];
        let mut h = vec![0.0; (steps + 1) * hidden];
        let mut c = vec![0.0; (steps + 1) * hidden];
        let mut gates: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; steps * hidden]);
        let mut tanh_c = vec![0.0; steps * hidden];
        let mut z = [0.0f64; 4];

        for t in 0..steps {
            let xt = x.row(t);
            let (h_past, h_next) = h.split_at_mut((t + 1) * hidden);
            let h_prev = &h_past[t * hidden..];
            let (c_past, c_next) = c.split_at_mut((t + 1) * hidden);
            let c_prev = &c_past[t * hidden..];
            for j in 0..hidden {
                for (g, zg) in z.iter_mut().enumerate() {
                    let wx: f64 = self.w[g].row(j).iter().zip(xt).map(|(a, b)| a * b).sum();
                    let uh: f64 = self.u[g].row(j).iter().zip(h_prev).map(|(a, b)| a * b).sum();
                    *zg = self.b[g].data()[j] + wx + uh;
                }
                let ig = sigmoid(z[I]);
                let fg = sigmoid(z[F]);
                let og = sigmoid(z[O]);
                let gg = z[G].tanh();
                let ct = fg * c_prev[j] + ig * gg;
                let tc = ct.tanh();
                let at = t * hidden + j;
                gates[I][at] = ig;
                gates[F][at] = fg;
                gates[O][at] = og;
                gates[G][at] = gg;
                tanh_c[at] = tc;
                c_next[j] = ct;
                h_next[j] = og * tc;
            }
        }

        let out = if return_sequence {
            Tensor::new(vec![steps, hidden], h[hidden..].to_vec())?
        } else {
            Tensor::new(vec![hidden], h[steps * hidden..].to_vec())?
        };
        Ok((
            out,
            LstmCache {
                input: x.clone(),
                return_sequence,
                hidden,
                h,
                c,
                gates,
                tanh_c,
            },
        ))
    }

    /// Backpropagation through time over every step of the cached sequence.
    pub fn backward(&self, grad_out: &Tensor, cache: LstmCache) -> Result<(Tensor, LstmParams)> {
        let hidden = self.hidden();
        let f_in = self.in_features();
        let steps = cache.input.shape()[0];
        if cache.hidden != hidden || cache.input.shape()[1] != f_in {
            return Err(Error::CacheMismatch {
                layer: "lstm",
                detail: format!(
                    "cache has H={} F={}, params have H={hidden} F={f_in}",
                    cache.hidden,
                    cache.input.shape()[1]
                ),
            });
        }
        let expected: Vec<usize> = if cache.return_sequence {
            vec![steps, hidden]
        } else {
            vec![hidden]
        };
        if grad_out.shape() != expected.as_slice() {
            return Err(Error::CacheMismatch {
                layer: "lstm",
                detail: format!(
                    "gradient shape {:?}, expected {:?}",
                    grad_out.shape(),
                    expected
                ),
            });
        }

        let go = grad_out.data();
        let mut gw: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden * f_in]);
        let mut gu: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden * hidden]);
        let mut gb: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);
        let mut gx = vec![0.0; steps * f_in];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let mut dz: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hidden]);

        for t in (0..steps).rev() {
            let xt = cache.input.row(t);
            let h_prev = &cache.h[t * hidden..(t + 1) * hidden];
            let c_prev = &cache.c[t * hidden..(t + 1) * hidden];
            for j in 0..hidden {
                let at = t * hidden + j;
                let mut dh = dh_next[j];
                if cache.return_sequence {
                    dh += go[at];
                } else if t + 1 == steps {
                    dh += go[j];
                }
                let (ig, fg, og, gg) = (
                    cache.gates[I][at],
                    cache.gates[F][at],
                    cache.gates[O][at],
                    cache.gates[G][at],
                );
                let tc = cache.tanh_c[at];
                let dc = dh * og * (1.0 - tc * tc) + dc_next[j];
                dz[O][j] = dh * tc * og * (1.0 - og);
                dz[I][j] = dc * gg * ig * (1.0 - ig);
                dz[F][j] = dc * c_prev[j] * fg * (1.0 - fg);
                dz[G][j] = dc * ig * (1.0 - gg * gg);
                dc_next[j] = dc * fg;
            }

            dh_next.fill(0.0);
            let gxt = &mut gx[t * f_in..(t + 1) * f_in];
            for g in 0..4 {
                let w = self.w[g].data();
                let u = self.u[g].data();
                for j in 0..hidden {
                    let d = dz[g][j];
                    if d == 0.0 {
                        continue;
                    }
                    gb[g][j] += d;
                    let w_row = &w[j * f_in..(j + 1) * f_in];
                    let gw_row = &mut gw[g][j * f_in..(j + 1) * f_in];
                    for k in 0..f_in {
                        gw_row[k] += d * xt[k];
                        gxt[k] += d * w_row[k];
                    }
                    let u_row = &u[j * hidden..(j + 1) * hidden];
                    let gu_row = &mut gu[g][j * hidden..(j + 1) * hidden];
                    for k in 0..hidden {
                        gu_row[k] += d * h_prev[k];
                        dh_next[k] += d * u_row[k];
                    }
                }
            }
        }

        let to_tensors = |parts: [Vec<f64>; 4], shape: &[usize]| -> Result<[Tensor; 4]> {
            let [a, b, c, d] = parts;
            Ok([
                Tensor::new(shape.to_vec(), a)?,
                Tensor::new(shape.to_vec(), b)?,
                Tensor::new(shape.to_vec(), c)?,
                Tensor::new(shape.to_vec(), d)?,
            ])
        };
        Ok((
            Tensor::new(vec![steps, f_in], gx)?,
            LstmParams {
                w: to_tensors(gw, &[hidden, f_in])?,
                u: to_tensors(gu, &[hidden, hidden])?,
                b: to_tensors(gb, &[hidden])?,
            },
        ))
    }
}

impl NamedTensors for LstmParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        const W: [&str; 4] = ["w_i", "w_f", "w_o", "w_g"];
        const U: [&str; 4] = ["u_i", "u_f", "u_o", "u_g"];
        const B: [&str; 4] = ["b_i", "b_f", "b_o", "b_g"];
        let mut out = Vec::with_capacity(12);
        out.extend(W.iter().copied().zip(self.w.iter()));
        out.extend(U.iter().copied().zip(self.u.iter()));
        out.extend(B.iter().copied().zip(self.b.iter()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Tensor)> {
        const W: [&str; 4] = ["w_i", "w_f", "w_o", "w_g"];
        const U: [&str; 4] = ["u_i", "u_f", "u_o", "u_g"];
        const B: [&str; 4] = ["b_i", "b_f", "b_o", "b_g"];
        let mut out = Vec::with_capacity(12);
        out.extend(W.iter().copied().zip(self.w.iter_mut()));
        out.extend(U.iter().copied().zip(self.u.iter_mut()));
        out.extend(B.iter().copied().zip(self.b.iter_mut()));
        out
    }
}
