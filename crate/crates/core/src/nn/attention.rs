use rand::Rng;

use super::init::xavier_uniform;
use super::params::{join_name, Params};
use crate::error::{contract, shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, softmax_in_place, Tensor};

/// Bilinear ("general") attention: `score_j = h · (W e_j)`.
///
/// Encoder outputs are `[batch, src_len, enc_dim]`; the mask has one flag per
/// `(batch, position)`, `true` meaning the position is attendable.
#[derive(Clone, Debug, PartialEq)]
pub struct Attention<T> {
    /// `enc_dim × dec_dim`
    pub w_key: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct AttentionCache<T> {
    pub query: Tensor<T>,
    /// `batch × src_len`, zero on masked positions.
    pub weights: Tensor<T>,
}

impl<T: Scalar> Attention<T> {
    pub fn new<R: Rng>(rng: &mut R, enc_dim: usize, dec_dim: usize) -> Self {
        Self {
            w_key: xavier_uniform(rng, enc_dim, dec_dim),
        }
    }

    pub fn enc_dim(&self) -> usize {
        self.w_key.rows()
    }

    pub fn dec_dim(&self) -> usize {
        self.w_key.cols()
    }

    /// Projects encoder outputs to keys once per source batch: `[batch, src_len, dec_dim]`.
    pub fn keys(&self, enc: &Tensor<T>) -> Result<Tensor<T>> {
        let (b, s) = enc_dims(enc)?;
        let flat = enc.clone().reshape(&[b * s, self.enc_dim()])?;
        flat.matmul(&self.w_key)?.reshape(&[b, s, self.dec_dim()])
    }

    /// Returns `(context: batch × enc_dim, cache)`.
    pub fn forward(
        &self,
        query: &Tensor<T>,
        enc: &Tensor<T>,
        keys: &Tensor<T>,
        mask: &[bool],
    ) -> Result<(Tensor<T>, AttentionCache<T>)> {
        let (b, s) = enc_dims(enc)?;
        let e = self.enc_dim();
        let d = self.dec_dim();
        if query.rows() != b || query.cols() != d || mask.len() != b * s || keys.len() != b * s * d
        {
            return Err(shape_err!(
                "attention query {:?} over enc {:?} with mask of {}",
                query.shape(),
                enc.shape(),
                mask.len()
            ));
        }
        let mut weights = vec![T::zero(); b * s];
        let mut context = vec![T::zero(); b * e];
        let kd = keys.data();
        let ed = enc.data();
        for r in 0..b {
            let q = query.row(r);
            let m = &mask[r * s..(r + 1) * s];
            if !m.iter().any(|&v| v) {
                return Err(contract!("attention row {r} has every position masked"));
            }
            let w = &mut weights[r * s..(r + 1) * s];
            masked_scores(q, &kd[r * s * d..(r + 1) * s * d], d, m, w);
            let ctx = &mut context[r * e..(r + 1) * e];
            for j in 0..s {
                if m[j] {
                    let ej = &ed[(r * s + j) * e..(r * s + j + 1) * e];
                    for (c, &v) in ctx.iter_mut().zip(ej) {
                        *c += w[j] * v;
                    }
                }
            }
        }
        let cache = AttentionCache {
            query: query.clone(),
            weights: Tensor::from_vec(&[b, s], weights)?,
        };
        Ok((Tensor::from_vec(&[b, e], context)?, cache))
    }

    /// Back-propagates `d_context` for one step. Returns `dquery`; accumulates
    /// into `d_enc` (direct path) and `d_keys` (through the scores).
    pub fn backward_step(
        &self,
        cache: &AttentionCache<T>,
        enc: &Tensor<T>,
        keys: &Tensor<T>,
        d_context: &Tensor<T>,
        d_enc: &mut Tensor<T>,
        d_keys: &mut Tensor<T>,
    ) -> Result<Tensor<T>> {
        let (b, s) = enc_dims(enc)?;
        let e = self.enc_dim();
        let d = self.dec_dim();
        let mut dquery = vec![T::zero(); b * d];
        let ed = enc.data();
        let kd = keys.data();
        let mut dalpha = vec![T::zero(); s];
        for r in 0..b {
            let w = cache.weights.row(r);
            let dc = d_context.row(r);
            let q = cache.query.row(r);
            let mut weighted = T::zero();
            for j in 0..s {
                let off = (r * s + j) * e;
                dalpha[j] = dot(dc, &ed[off..off + e]);
                weighted += w[j] * dalpha[j];
                if w[j] != T::zero() {
                    let de = &mut d_enc.data_mut()[off..off + e];
                    for (g, &c) in de.iter_mut().zip(dc) {
                        *g += w[j] * c;
                    }
                }
            }
            let dq = &mut dquery[r * d..(r + 1) * d];
            for j in 0..s {
                let ds = w[j] * (dalpha[j] - weighted);
                if ds == T::zero() {
                    continue;
                }
                let off = (r * s + j) * d;
                for (g, &k) in dq.iter_mut().zip(&kd[off..off + d]) {
                    *g += ds * k;
                }
                for (g, &qv) in d_keys.data_mut()[off..off + d].iter_mut().zip(q) {
                    *g += ds * qv;
                }
            }
        }
        Tensor::from_vec(&[b, d], dquery)
    }

    /// Closes the key projection: accumulates `dW` and adds `d_keys·Wᵀ` into `d_enc`.
    pub fn backward_keys(
        &self,
        enc: &Tensor<T>,
        d_keys: &Tensor<T>,
        grad: &mut Self,
        d_enc: &mut Tensor<T>,
    ) -> Result<()> {
        let (b, s) = enc_dims(enc)?;
        let flat_enc = enc.clone().reshape(&[b * s, self.enc_dim()])?;
        let flat_dk = d_keys.clone().reshape(&[b * s, self.dec_dim()])?;
        flat_enc.matmul_tn_acc(&flat_dk, &mut grad.w_key)?;
        let de = flat_dk.matmul_nt(&self.w_key)?;
        for (a, &v) in d_enc.data_mut().iter_mut().zip(de.data()) {
            *a += v;
        }
        Ok(())
    }
}

fn enc_dims<T: Scalar>(enc: &Tensor<T>) -> Result<(usize, usize)> {
    match enc.shape() {
        [b, s, _] if *s > 0 => Ok((*b, *s)),
        other => Err(shape_err!(
            "encoder outputs must be [batch, len>0, dim], got {other:?}"
        )),
    }
}

fn masked_scores<T: Scalar>(q: &[T], keys: &[T], d: usize, mask: &[bool], out: &mut [T]) {
    let mut live = Vec::with_capacity(mask.len());
    for (j, &m) in mask.iter().enumerate() {
        if m {
            live.push(dot(q, &keys[j * d..(j + 1) * d]));
        }
    }
    softmax_in_place(&mut live);
    let mut it = live.into_iter();
    for (o, &m) in out.iter_mut().zip(mask) {
        *o = if m { it.next().unwrap() } else { T::zero() };
    }
}

impl<T: Scalar> Params<T> for Attention<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join_name(prefix, "wk"), &self.w_key));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join_name(prefix, "wk"), &mut self.w_key));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::normal_init;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(b: usize, s: usize) -> (Attention<f64>, Tensor<f64>, Tensor<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let att = Attention::new(&mut rng, 4, 3);
        let enc = normal_init(&mut rng, &[b, s, 4], 1.0);
        let q = normal_init(&mut rng, &[b, 3], 1.0);
        (att, enc, q)
    }

    #[test]
    fn single_unmasked_position_takes_all_weight() {
        let (att, enc, q) = setup(1, 4);
        let keys = att.keys(&enc).unwrap();
        let (ctx, cache) = att
            .forward(&q, &enc, &keys, &[false, false, true, false])
            .unwrap();
        assert_eq!(cache.weights.data(), &[0.0, 0.0, 1.0, 0.0]);
        for k in 0..4 {
            assert!((ctx.get(0, k) - enc.data()[2 * 4 + k]).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_scores_are_uniform() {
        let (att, _, q) = setup(1, 3);
        let enc = Tensor::from_vec(&[1, 3, 4], [0.1, 0.2, -0.3, 0.4].repeat(3)).unwrap();
        let keys = att.keys(&enc).unwrap();
        let (_, cache) = att.forward(&q, &enc, &keys, &[true; 3]).unwrap();
        for &w in cache.weights.data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn matches_log_sum_exp_softmax_oracle() {
        let (att, enc, q) = setup(2, 5);
        let keys = att.keys(&enc).unwrap();
        let mask = [true, true, false, true, true, true, false, true, true, true];
        let (_, cache) = att.forward(&q, &enc, &keys, &mask).unwrap();
        for r in 0..2 {
            // scores recomputed straight from W and e_j
            let scores: Vec<Option<f64>> = (0..5)
                .map(|j| {
                    mask[r * 5 + j].then(|| {
                        let mut s = 0.0;
                        for a in 0..4 {
                            for c in 0..3 {
                                s += q.get(r, c)
                                    * att.w_key.get(a, c)
                                    * enc.data()[(r * 5 + j) * 4 + a];
                            }
                        }
                        s
                    })
                })
                .collect();
            let mx = scores.iter().flatten().cloned().fold(f64::MIN, f64::max);
            let lse = mx
                + scores
                    .iter()
                    .flatten()
                    .map(|s| (s - mx).exp())
                    .sum::<f64>()
                    .ln();
            let mut total = 0.0;
            for j in 0..5 {
                let expect = scores[j].map(|s| (s - lse).exp()).unwrap_or(0.0);
                assert!((cache.weights.get(r, j) - expect).abs() <= 1e-12);
                total += cache.weights.get(r, j);
            }
            assert!((total - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn fully_masked_row_is_a_contract_violation() {
        let (att, enc, q) = setup(1, 2);
        let keys = att.keys(&enc).unwrap();
        let err = att.forward(&q, &enc, &keys, &[false, false]).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
    }
}
