//! Dense row-major `f64` arrays of rank 1 to 3.
//!
//! Every public operation is pure: inputs are borrowed, results are freshly
//! allocated, and any operation that would produce a non-finite value returns
//! [`Error::NonFinite`] instead.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("data", &self.data)
            .finish()
    }
}

/// Elementwise nonlinearities used by the layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Sum,
    Mean,
    Max,
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    let ok = (1..=3).contains(&shape.len())
        && shape.iter().all(|&d| d > 0)
        && shape.iter().product::<usize>() == len;
    if ok {
        Ok(())
    } else {
        Err(Error::Shape {
            shape: shape.to_vec(),
            len,
        })
    }
}

fn check_finite(data: &[f64], op: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_shape(&shape, data.len())?;
        check_finite(&data, "Tensor::new")?;
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        assert!(
            check_shape(shape, len).is_ok(),
            "invalid tensor shape {shape:?}"
        );
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![data.len()], data)
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Tensor::new(vec![1], vec![value])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        Tensor::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access for in-place parameter updates. Callers are responsible
    /// for keeping the values finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        check_shape(&shape, self.data.len())?;
        Ok(Tensor {
            shape,
            data: self.data,
        })
    }

    /// Row `i` of a rank-2 tensor.
    pub fn row(&self, i: usize) -> &[f64] {
        debug_assert_eq!(self.rank(), 2);
        let cols = self.shape[1];
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn zeros_like(&self) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: vec![0.0; self.data.len()],
        }
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.rank());
        index
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &d)| {
                debug_assert!(i < d);
                acc * d + i
            })
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 || self.shape[1] != other.shape[0] {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let (m, k, n) = (self.shape[0], self.shape[1], other.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let a_row = &self.data[i * k..(i + 1) * k];
            let c_row = &mut out[i * n..(i + 1) * n];
            for (p, &a) in a_row.iter().enumerate() {
                let b_row = &other.data[p * n..(p + 1) * n];
                for (c, &b) in c_row.iter_mut().zip(b_row) {
                    *c += a * b;
                }
            }
        }
        check_finite(&out, "matmul")?;
        Ok(Tensor {
            shape: vec![m, n],
            data: out,
        })
    }

    pub fn map_unary(&self, f: Activation) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&x| f.apply(x)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Result<Tensor> {
        let data: Vec<f64> = self.data.iter().map(|v| v * factor).collect();
        check_finite(&data, "scale")?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    fn zip_with(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Dimension {
                op,
                lhs: self.shape.clone(),
                rhs: other.shape.clone(),
            });
        }
        let data: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        check_finite(&data, op)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn reduce(&self, op: Reduction, axis: usize) -> Result<Tensor> {
        self.reduce_with_argmax(op, axis).map(|(t, _)| t)
    }

    /// Reduces along `axis`. For [`Reduction::Max`] the second element holds the
    /// position of the (first) maximum along the axis for every output cell.
    pub fn reduce_with_argmax(
        &self,
        op: Reduction,
        axis: usize,
    ) -> Result<(Tensor, Option<Vec<usize>>)> {
        if axis >= self.rank() {
            return Err(Error::Axis {
                axis,
                rank: self.rank(),
            });
        }
        let outer: usize = self.shape[..axis].iter().product();
        let extent = self.shape[axis];
        let inner: usize = self.shape[axis + 1..].iter().product();

        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::new();
        for o in 0..outer {
            for i in 0..inner {
                let at = |a: usize| self.data[(o * extent + a) * inner + i];
                match op {
                    Reduction::Sum | Reduction::Mean => {
                        let s: f64 = (0..extent).map(at).sum();
                        out.push(if op == Reduction::Mean {
                            s / extent as f64
                        } else {
                            s
                        });
                    }
                    Reduction::Max => {
                        let mut best = 0;
                        for a in 1..extent {
                            if at(a) > at(best) {
                                best = a;
                            }
                        }
                        out.push(at(best));
                        argmax.push(best);
                    }
                }
            }
        }
        check_finite(&out, "reduce")?;
        let mut shape: Vec<usize> = self.shape[..axis]
            .iter()
            .chain(&self.shape[axis + 1..])
            .copied()
            .collect();
        if shape.is_empty() {
            shape.push(1);
        }
        let argmax = (op == Reduction::Max).then_some(argmax);
        Ok((Tensor { shape, data: out }, argmax))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
