use crate::error::{contract, shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{softmax_in_place, Tensor};

/// Mean token-level negative log-likelihood over rows where `mask` is true.
///
/// Returns the loss and `dL/dlogits`, which is `(softmax − onehot) / n` on live
/// rows and zero elsewhere.
pub fn cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    targets: &[usize],
    mask: &[bool],
) -> Result<(T, Tensor<T>)> {
    let (n, v) = (logits.rows(), logits.cols());
    if targets.len() != n || mask.len() != n {
        return Err(shape_err!(
            "cross entropy over {n} rows with {} targets and {} mask flags",
            targets.len(),
            mask.len()
        ));
    }
    let live = mask.iter().filter(|&&m| m).count();
    if live == 0 {
        return Err(contract!("cross entropy needs at least one unmasked token"));
    }
    let inv = T::one() / T::from_usize(live).unwrap();
    let mut grad = Tensor::zeros(&[n, v]);
    let mut loss = T::zero();
    for r in 0..n {
        if !mask[r] {
            continue;
        }
        let t = targets[r];
        if t >= v {
            return Err(shape_err!("target id {t} outside vocabulary of {v}"));
        }
        let row = logits.row(r);
        let max = row.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<T>().ln();
        loss += lse - row[t];
        let g = grad.row_mut(r);
        g.copy_from_slice(row);
        softmax_in_place(g);
        g[t] -= T::one();
        for x in g.iter_mut() {
            *x *= inv;
        }
    }
    Ok((loss * inv, grad))
}

/// Maps `dL/dp` to `dL/dlogits` through a row softmax whose output is `probs`.
pub fn softmax_backward<T: Scalar>(probs: &Tensor<T>, dprobs: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(probs.shape());
    let c = probs.cols();
    for r in 0..probs.rows() {
        let p = probs.row(r);
        let dp = dprobs.row(r);
        let inner: T = p.iter().zip(dp).map(|(&a, &b)| a * b).sum();
        for (k, o) in out.data_mut()[r * c..(r + 1) * c].iter_mut().enumerate() {
            *o = p[k] * (dp[k] - inner);
        }
    }
    out
}
