use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub fn join_name(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}/{name}")
    }
}

/// A tree of named parameter tensors.
///
/// Gradient containers are values of the implementing type itself, so the
/// traversal order of `visit` and `visit_mut` must agree.
pub trait Params<T: Scalar> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>);
    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>);

    fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut v = Vec::new();
        self.visit("", &mut v);
        v
    }

    fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut v = Vec::new();
        self.visit_mut("", &mut v);
        v
    }

    fn num_params(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }

    /// A gradient container: same structure, all zeros.
    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut g = self.clone();
        g.zero();
        g
    }

    fn zero(&mut self) {
        for (_, t) in self.named_mut() {
            t.fill(T::zero());
        }
    }

    fn grad_norm(&self) -> T {
        self.named()
            .iter()
            .map(|(_, t)| t.sum_sq())
            .sum::<T>()
            .sqrt()
    }

    fn scale_all(&mut self, s: T) {
        for (_, t) in self.named_mut() {
            t.scale(s);
        }
    }

    fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }
}
