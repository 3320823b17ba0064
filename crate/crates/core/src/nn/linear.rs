use rand::Rng;

use super::init::{normal_init, xavier_uniform};
use super::params::{join_name, Params};
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Affine map `y = x·W + b` over a batch of row vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    /// `in × out`
    pub weight: Tensor<T>,
    /// `out`
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn new<R: Rng>(rng: &mut R, input: usize, output: usize) -> Self {
        Self {
            weight: xavier_uniform(rng, input, output),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape().len() != 2 || bias.len() != weight.cols() {
            return Err(shape_err!(
                "linear weight {:?} with bias {:?}",
                weight.shape(),
                bias.shape()
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut y = x.matmul(&self.weight)?;
        y.add_row_vector(&self.bias)?;
        Ok(y)
    }

    /// Accumulates `dW`, `db` into `grad` and returns `dx`.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>, grad: &mut Self) -> Result<Tensor<T>> {
        x.matmul_tn_acc(dy, &mut grad.weight)?;
        dy.sum_rows_acc(&mut grad.bias)?;
        dy.matmul_nt(&self.weight)
    }
}

impl<T: Scalar> Params<T> for Linear<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join_name(prefix, "w"), &self.weight));
        out.push((join_name(prefix, "b"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join_name(prefix, "w"), &mut self.weight));
        out.push((join_name(prefix, "b"), &mut self.bias));
    }
}

/// Lookup table of `vocab × dim` row embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<T> {
    pub table: Tensor<T>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new<R: Rng>(rng: &mut R, vocab: usize, dim: usize) -> Self {
        Self {
            table: normal_init(rng, &[vocab, dim], 1.0),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn forward(&self, ids: &[usize]) -> Result<Tensor<T>> {
        let d = self.dim();
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= self.vocab_size() {
                return Err(shape_err!(
                    "token id {id} outside vocabulary of {}",
                    self.vocab_size()
                ));
            }
            data.extend_from_slice(self.table.row(id));
        }
        Tensor::from_vec(&[ids.len(), d], data)
    }

    /// Scatter-adds row gradients back into the table gradient.
    pub fn backward(&self, ids: &[usize], dout: &Tensor<T>, grad: &mut Self) {
        for (i, &id) in ids.iter().enumerate() {
            let src = dout.row(i);
            for (g, &s) in grad.table.row_mut(id).iter_mut().zip(src) {
                *g += s;
            }
        }
    }
}

impl<T: Scalar> Params<T> for Embedding<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join_name(prefix, "table"), &self.table));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join_name(prefix, "table"), &mut self.table));
    }
}
