//! Adam with bias correction, and global-norm gradient clipping.

use crate::error::{shape_err, Error, Result};
use crate::nn::Params;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    pub first_moment: Vec<Tensor<T>>,
    pub second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr: T::lit(lr),
            beta1: T::lit(beta1),
            beta2: T::lit(beta2),
            eps: T::lit(eps),
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    /// One bias-corrected Adam update of `params` with `grads`.
    pub fn update<P: Params<T>>(&mut self, params: &mut P, grads: &P) -> Result<()> {
        let g = grads.named();
        if let Some((name, _)) = g.iter().find(|(_, t)| !t.is_finite()) {
            return Err(Error::Numeric(format!("non-finite gradient for {name}")));
        }
        let mut p = params.named_mut();
        if p.len() != g.len() {
            return Err(shape_err!(
                "{} parameters but {} gradients",
                p.len(),
                g.len()
            ));
        }
        if self.first_moment.is_empty() {
            self.first_moment = g.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
            self.second_moment = self.first_moment.clone();
        }
        for ((pn, pt), (gn, gt)) in p.iter().zip(&g) {
            if pn != gn || pt.shape() != gt.shape() {
                return Err(shape_err!("gradient for {pn} has shape {:?}", gt.shape()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for (k, ((_, pt), (_, gt))) in p.iter_mut().zip(&g).enumerate() {
            let m = self.first_moment[k].data_mut();
            let v = self.second_moment[k].data_mut();
            for (((x, &gr), mi), vi) in pt.data_mut().iter_mut().zip(gt.data()).zip(m).zip(v) {
                *mi = self.beta1 * *mi + (one - self.beta1) * gr;
                *vi = self.beta2 * *vi + (one - self.beta2) * gr * gr;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *x -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

/// Rescales `grads` so the global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm<T: Scalar, P: Params<T>>(grads: &mut P, max_norm: T) -> T {
    let norm = grads.grad_norm();
    if norm > max_norm && norm > T::zero() {
        grads.scale_all(max_norm / norm);
    }
    norm
}
