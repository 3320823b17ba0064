//! The shared encoder–decoder.
//!
//! A two-layer bidirectional LSTM encodes the source; the concatenated final
//! states of the top layer (`z`) initialise every decoder layer through a tanh
//! bridge. The decoder is a two-layer LSTM with bilinear attention on its top
//! state. The style embedding of the requested output style replaces the
//! start-of-sequence input, which is the only place style enters the network.

use std::path::Path;

use rand::Rng;

use crate::checkpoint::{self, NamedTensors};
use crate::classifier::TextCnn;
use crate::corpus::{Style, BOS, EOS, MAX_LEN, PAD};
use crate::error::{contract, shape_err, Error, Result};
use crate::nn::{
    cross_entropy, join_name, normal_init, softmax_backward, Attention, AttentionCache, Embedding,
    Linear, LstmCache, LstmCell, Params,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const PREFIX: &str = "model";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelConfig {
    pub vocab: usize,
    pub emb_dim: usize,
    /// Per direction.
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub layers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Seq2Seq<T> {
    pub embed: Embedding<T>,
    /// `2 × E`, row `Style::index()`.
    pub style: Tensor<T>,
    pub enc_fwd: Vec<LstmCell<T>>,
    pub enc_bwd: Vec<LstmCell<T>>,
    pub bridge: Linear<T>,
    pub dec: Vec<LstmCell<T>>,
    pub attn: Attention<T>,
    /// `tanh(W[ctx; h])`, sized to the embedding so the output layer can share it.
    pub combine: Linear<T>,
    /// Output bias; the output weights are the embedding table.
    pub out_bias: Tensor<T>,
}

/// A padded source batch; every row holds at least one token.
#[derive(Clone, Debug)]
pub struct SrcBatch {
    pub size: usize,
    pub len: usize,
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
    pub lens: Vec<usize>,
}

impl SrcBatch {
    pub fn new(seqs: &[&[usize]]) -> Result<Self> {
        if seqs.is_empty() {
            return Err(contract!("empty source batch"));
        }
        if seqs.iter().any(|s| s.is_empty()) {
            return Err(contract!("source sentences must be nonempty"));
        }
        let len = seqs.iter().map(|s| s.len()).max().unwrap();
        let mut ids = vec![PAD; seqs.len() * len];
        let mut mask = vec![false; seqs.len() * len];
        for (r, s) in seqs.iter().enumerate() {
            ids[r * len..r * len + s.len()].copy_from_slice(s);
            mask[r * len..r * len + s.len()]
                .iter_mut()
                .for_each(|m| *m = true);
        }
        Ok(Self {
            size: seqs.len(),
            len,
            ids,
            mask,
            lens: seqs.iter().map(|s| s.len()).collect(),
        })
    }

    fn column(&self, t: usize) -> (Vec<usize>, Vec<bool>) {
        (0..self.size)
            .map(|r| (self.ids[r * self.len + t], self.mask[r * self.len + t]))
            .unzip()
    }
}

/// Keeps `new` on live rows and `old` elsewhere.
fn blend<T: Scalar>(new: Tensor<T>, old: &Tensor<T>, live: &[bool]) -> Tensor<T> {
    let mut out = new;
    for (r, &m) in live.iter().enumerate() {
        if !m {
            out.row_mut(r).copy_from_slice(old.row(r));
        }
    }
    out
}

/// Splits a gradient between live rows (returned) and dead rows (left in `g`).
fn split_live<T: Scalar>(g: &mut Tensor<T>, live: &[bool]) -> Tensor<T> {
    let mut out = g.clone();
    for (r, &m) in live.iter().enumerate() {
        if m {
            g.row_mut(r).fill(T::zero());
        } else {
            out.row_mut(r).fill(T::zero());
        }
    }
    out
}

struct DirRun<T> {
    /// Indexed by source position.
    caches: Vec<LstmCache<T>>,
    outputs: Vec<Tensor<T>>,
    last: Tensor<T>,
}

struct EncCache<T> {
    /// Per layer, per position: the layer input.
    inputs: Vec<Vec<Tensor<T>>>,
    runs: Vec<[DirRun<T>; 2]>,
}

/// Encoder outputs (`[B, S, 2H]`), attention keys, and the pooled state `z`.
pub struct Encoded<T> {
    pub outputs: Tensor<T>,
    pub keys: Tensor<T>,
    pub z: Tensor<T>,
    pub src: SrcBatch,
    cache: EncCache<T>,
}

struct DecStep<T> {
    lstm: Vec<LstmCache<T>>,
    attn: AttentionCache<T>,
    comb_in: Tensor<T>,
    act: Tensor<T>,
}

struct DecRun<T> {
    init: Tensor<T>,
    styles: Vec<Style>,
    /// Token fed at steps `1..`.
    inputs: Vec<Vec<usize>>,
    steps: Vec<DecStep<T>>,
    logits: Vec<Tensor<T>>,
}

struct DecState<T> {
    h: Vec<Tensor<T>>,
    c: Vec<Tensor<T>>,
}

/// Greedy output: tokens without the closing EOS.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodeOutput {
    pub ids: Vec<usize>,
    pub style: Style,
}

impl<T: Scalar> Seq2Seq<T> {
    pub fn new<R: Rng>(rng: &mut R, cfg: &ModelConfig) -> Result<Self> {
        if cfg.layers == 0 || cfg.emb_dim == 0 || cfg.enc_hidden == 0 || cfg.dec_hidden == 0 {
            return Err(Error::Config(
                "model dimensions and layer count must be positive".into(),
            ));
        }
        let (e, h, d) = (cfg.emb_dim, cfg.enc_hidden, cfg.dec_hidden);
        let embed = Embedding::new(rng, cfg.vocab, e);
        let style = normal_init(rng, &[2, e], 1.0);
        let mut enc_fwd = Vec::new();
        let mut enc_bwd = Vec::new();
        for l in 0..cfg.layers {
            let input = if l == 0 { e } else { 2 * h };
            enc_fwd.push(LstmCell::new(rng, input, h));
            enc_bwd.push(LstmCell::new(rng, input, h));
        }
        let bridge = Linear::new(rng, 2 * h, cfg.layers * d);
        let dec = (0..cfg.layers)
            .map(|l| LstmCell::new(rng, if l == 0 { e } else { d }, d))
            .collect();
        Ok(Self {
            embed,
            style,
            enc_fwd,
            enc_bwd,
            bridge,
            dec,
            attn: Attention::new(rng, 2 * h, d),
            combine: Linear::new(rng, 2 * h + d, e),
            out_bias: Tensor::zeros(&[cfg.vocab]),
        })
    }

    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            vocab: self.embed.vocab_size(),
            emb_dim: self.embed.dim(),
            enc_hidden: self.enc_fwd[0].hidden_dim(),
            dec_hidden: self.dec[0].hidden_dim(),
            layers: self.dec.len(),
        }
    }

    fn run_dir(
        cell: &LstmCell<T>,
        inputs: &[Tensor<T>],
        src: &SrcBatch,
        reverse: bool,
    ) -> Result<DirRun<T>> {
        let hd = cell.hidden_dim();
        let mut h = Tensor::zeros(&[src.size, hd]);
        let mut c = Tensor::zeros(&[src.size, hd]);
        let mut caches: Vec<Option<LstmCache<T>>> = (0..src.len).map(|_| None).collect();
        let mut outputs: Vec<Option<Tensor<T>>> = (0..src.len).map(|_| None).collect();
        let order: Vec<usize> = if reverse {
            (0..src.len).rev().collect()
        } else {
            (0..src.len).collect()
        };
        for t in order {
            let (_, live) = src.column(t);
            let (hn, cn, cache) = cell.forward(&inputs[t], &h, &c)?;
            h = blend(hn, &h, &live);
            c = blend(cn, &c, &live);
            caches[t] = Some(cache);
            outputs[t] = Some(h.clone());
        }
        Ok(DirRun {
            caches: caches.into_iter().map(Option::unwrap).collect(),
            outputs: outputs.into_iter().map(Option::unwrap).collect(),
            last: h,
        })
    }

    pub fn encode(&self, src: &SrcBatch) -> Result<Encoded<T>> {
        let mut layer_in: Vec<Tensor<T>> = (0..src.len)
            .map(|t| self.embed.forward(&src.column(t).0))
            .collect::<Result<_>>()?;
        let mut inputs = Vec::new();
        let mut runs = Vec::new();
        for (fwd, bwd) in self.enc_fwd.iter().zip(&self.enc_bwd) {
            let rf = Self::run_dir(fwd, &layer_in, src, false)?;
            let rb = Self::run_dir(bwd, &layer_in, src, true)?;
            let next = (0..src.len)
                .map(|t| Tensor::concat_cols(&[&rf.outputs[t], &rb.outputs[t]]))
                .collect::<Result<_>>()?;
            inputs.push(std::mem::replace(&mut layer_in, next));
            runs.push([rf, rb]);
        }
        let top = runs.last().unwrap();
        let z = Tensor::concat_cols(&[&top[0].last, &top[1].last])?;
        let w = z.cols();
        let mut out = vec![T::zero(); src.size * src.len * w];
        for (t, o) in layer_in.iter().enumerate() {
            for r in 0..src.size {
                out[(r * src.len + t) * w..(r * src.len + t + 1) * w].copy_from_slice(o.row(r));
            }
        }
        let outputs = Tensor::from_vec(&[src.size, src.len, w], out)?;
        let keys = self.attn.keys(&outputs)?;
        Ok(Encoded {
            outputs,
            keys,
            z,
            src: src.clone(),
            cache: EncCache { inputs, runs },
        })
    }

    fn init_state(&self, enc: &Encoded<T>) -> Result<(Tensor<T>, DecState<T>)> {
        let init = self.bridge.forward(&enc.z)?.map(|v| v.tanh());
        let d = self.dec[0].hidden_dim();
        let h = (0..self.dec.len())
            .map(|l| init.slice_cols(l * d, (l + 1) * d))
            .collect();
        let c = (0..self.dec.len())
            .map(|_| Tensor::zeros(&[enc.src.size, d]))
            .collect();
        Ok((init, DecState { h, c }))
    }

    fn style_rows(&self, styles: &[Style]) -> Tensor<T> {
        let e = self.embed.dim();
        let mut x = Tensor::zeros(&[styles.len(), e]);
        for (r, s) in styles.iter().enumerate() {
            x.row_mut(r).copy_from_slice(self.style.row(s.index()));
        }
        x
    }

    fn dec_step(
        &self,
        enc: &Encoded<T>,
        x: Tensor<T>,
        st: &mut DecState<T>,
    ) -> Result<(Tensor<T>, DecStep<T>)> {
        let mut x = x;
        let mut lstm = Vec::with_capacity(self.dec.len());
        for (l, cell) in self.dec.iter().enumerate() {
            let (h, c, cache) = cell.forward(&x, &st.h[l], &st.c[l])?;
            x = h.clone();
            st.h[l] = h;
            st.c[l] = c;
            lstm.push(cache);
        }
        let (ctx, attn) = self
            .attn
            .forward(&x, &enc.outputs, &enc.keys, &enc.src.mask)?;
        let comb_in = Tensor::concat_cols(&[&ctx, &x])?;
        let act = self.combine.forward(&comb_in)?.map(|v| v.tanh());
        let mut logits = act.matmul_nt(&self.embed.table)?;
        logits.add_row_vector(&self.out_bias)?;
        Ok((
            logits,
            DecStep {
                lstm,
                attn,
                comb_in,
                act,
            },
        ))
    }

    /// Teacher forcing: one logit matrix per step, `max(len) + 1` steps.
    fn decode_teacher(
        &self,
        enc: &Encoded<T>,
        styles: &[Style],
        targets: &[&[usize]],
    ) -> Result<DecRun<T>> {
        if styles.len() != enc.src.size || targets.len() != enc.src.size {
            return Err(shape_err!(
                "decoder given {} styles and {} targets for {} rows",
                styles.len(),
                targets.len(),
                enc.src.size
            ));
        }
        let steps_n = targets.iter().map(|t| t.len()).max().unwrap() + 1;
        let (init, mut st) = self.init_state(enc)?;
        let mut steps = Vec::with_capacity(steps_n);
        let mut logits = Vec::with_capacity(steps_n);
        let mut inputs = Vec::with_capacity(steps_n);
        for t in 0..steps_n {
            let x = if t == 0 {
                self.style_rows(styles)
            } else {
                let ids: Vec<usize> = targets
                    .iter()
                    .map(|s| s.get(t - 1).copied().unwrap_or(PAD))
                    .collect();
                let x = self.embed.forward(&ids)?;
                inputs.push(ids);
                x
            };
            let (lg, step) = self.dec_step(enc, x, &mut st)?;
            logits.push(lg);
            steps.push(step);
        }
        Ok(DecRun {
            init,
            styles: styles.to_vec(),
            inputs,
            steps,
            logits,
        })
    }

    /// Greedy argmax decoding. PAD and BOS are never emitted and EOS is barred
    /// at the first step, so every output is nonempty. Rows stop at EOS or at
    /// `min(MAX_LEN, 2·source length + 10)` tokens.
    pub fn greedy(&self, src: &SrcBatch, styles: &[Style]) -> Result<Vec<DecodeOutput>> {
        if styles.len() != src.size {
            return Err(shape_err!("{} styles for {} rows", styles.len(), src.size));
        }
        let enc = self.encode(src)?;
        let (_, mut st) = self.init_state(&enc)?;
        let caps: Vec<usize> = src
            .lens
            .iter()
            .map(|&n| (2 * n + 10).min(MAX_LEN))
            .collect();
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); src.size];
        let mut done = vec![false; src.size];
        let mut x = self.style_rows(styles);
        for t in 0..=MAX_LEN {
            let (logits, _) = self.dec_step(&enc, x, &mut st)?;
            let mut next = vec![PAD; src.size];
            for r in 0..src.size {
                if done[r] {
                    continue;
                }
                let row = logits.row(r);
                let mut best = None::<(usize, T)>;
                for (v, &s) in row.iter().enumerate() {
                    if v == PAD || v == BOS || (v == EOS && t == 0) {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((v, s));
                    }
                }
                let tok = best.map(|b| b.0).unwrap_or(EOS);
                if tok == EOS || out[r].len() >= caps[r] {
                    done[r] = true;
                } else {
                    out[r].push(tok);
                    next[r] = tok;
                }
            }
            if done.iter().all(|&d| d) {
                break;
            }
            x = self.embed.forward(&next)?;
        }
        Ok(out
            .into_iter()
            .zip(styles)
            .map(|(ids, &style)| DecodeOutput { ids, style })
            .collect())
    }

    /// Mean token cross-entropy of `targets` (plus EOS) decoded in `styles` from
    /// `src`. Gradients, scaled by `weight`, are added to `grad` when given.
    pub fn mle(
        &self,
        src: &[&[usize]],
        styles: &[Style],
        targets: &[&[usize]],
        weight: T,
        grad: Option<&mut Self>,
    ) -> Result<T> {
        let batch = SrcBatch::new(src)?;
        let enc = self.encode(&batch)?;
        let run = self.decode_teacher(&enc, styles, targets)?;
        let b = batch.size;
        let v = self.embed.vocab_size();
        let steps = run.logits.len();
        let mut flat = Vec::with_capacity(steps * b * v);
        let mut tgt = Vec::with_capacity(steps * b);
        let mut mask = Vec::with_capacity(steps * b);
        for (t, lg) in run.logits.iter().enumerate() {
            flat.extend_from_slice(lg.data());
            for target in targets {
                let n = target.len();
                tgt.push(if t < n { target[t] } else { EOS });
                mask.push(t <= n);
            }
        }
        let flat = Tensor::from_vec(&[steps * b, v], flat)?;
        let (loss, dflat) = cross_entropy(&flat, &tgt, &mask)?;
        if let Some(g) = grad {
            let mut dlogits = Vec::with_capacity(steps);
            for t in 0..steps {
                let mut d =
                    Tensor::from_vec(&[b, v], dflat.data()[t * b * v..(t + 1) * b * v].to_vec())?;
                d.scale(weight);
                dlogits.push(d);
            }
            self.backward(&enc, &run, &dlogits, g)?;
        }
        Ok(loss)
    }

    /// Expected-embedding style loss of the greedy transfer of `src` into
    /// `styles`, averaged over rows.
    ///
    /// The greedy pass records no gradient; a teacher-forced replay on the
    /// greedy tokens reproduces its distributions and carries the gradient of
    /// the frozen classifier back into the decoder. Only the distributions that
    /// emitted a token enter the classifier.
    pub fn style_loss(
        &self,
        src: &[&[usize]],
        styles: &[Style],
        cls: &TextCnn<T>,
        weight: T,
        grad: Option<&mut Self>,
    ) -> Result<T> {
        let batch = SrcBatch::new(src)?;
        let decoded = self.greedy(&batch, styles)?;
        let tokens: Vec<&[usize]> = decoded.iter().map(|d| d.ids.as_slice()).collect();
        self.style_loss_on(&batch, styles, &tokens, cls, weight, grad)
    }

    /// The replay half of [`Seq2Seq::style_loss`] for given output tokens.
    pub fn style_loss_on(
        &self,
        batch: &SrcBatch,
        styles: &[Style],
        tokens: &[&[usize]],
        cls: &TextCnn<T>,
        weight: T,
        grad: Option<&mut Self>,
    ) -> Result<T> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(contract!("style loss needs nonempty outputs"));
        }
        let enc = self.encode(batch)?;
        let run = self.decode_teacher(&enc, styles, tokens)?;
        let b = batch.size;
        let v = self.embed.vocab_size();
        let probs: Vec<Tensor<T>> = run.logits.iter().map(|l| l.softmax_rows()).collect();
        let inv = T::one() / T::from_usize(b).unwrap();
        let mut total = T::zero();
        let mut dprobs: Vec<Tensor<T>> = (0..probs.len()).map(|_| Tensor::zeros(&[b, v])).collect();
        for r in 0..b {
            let n = tokens[r].len();
            let mut dist = Tensor::zeros(&[n, v]);
            for t in 0..n {
                dist.row_mut(t).copy_from_slice(probs[t].row(r));
            }
            let (loss, dp) = cls.style_loss(&dist, styles[r])?;
            total += loss;
            for t in 0..n {
                for (a, &g) in dprobs[t].row_mut(r).iter_mut().zip(dp.row(t)) {
                    *a = g * inv * weight;
                }
            }
        }
        if let Some(g) = grad {
            let dlogits: Vec<Tensor<T>> = probs
                .iter()
                .zip(&dprobs)
                .map(|(p, dp)| softmax_backward(p, dp))
                .collect();
            self.backward(&enc, &run, &dlogits, g)?;
        }
        Ok(total * inv)
    }

    fn backward(
        &self,
        enc: &Encoded<T>,
        run: &DecRun<T>,
        dlogits: &[Tensor<T>],
        grad: &mut Self,
    ) -> Result<()> {
        let b = enc.src.size;
        let d = self.dec[0].hidden_dim();
        let hw = enc.outputs.shape()[2];
        let nl = self.dec.len();
        let mut d_enc = Tensor::zeros(enc.outputs.shape());
        let mut d_keys = Tensor::zeros(enc.keys.shape());
        let mut dh: Vec<Tensor<T>> = (0..nl).map(|_| Tensor::zeros(&[b, d])).collect();
        let mut dc: Vec<Tensor<T>> = (0..nl).map(|_| Tensor::zeros(&[b, d])).collect();
        for t in (0..run.steps.len()).rev() {
            let step = &run.steps[t];
            dlogits[t].matmul_tn_acc(&step.act, &mut grad.embed.table)?;
            dlogits[t].sum_rows_acc(&mut grad.out_bias)?;
            let da = dlogits[t].matmul(&self.embed.table)?;
            let mut dpre = da;
            for (g, &a) in dpre.data_mut().iter_mut().zip(step.act.data()) {
                *g *= T::one() - a * a;
            }
            let dcomb = self
                .combine
                .backward(&step.comb_in, &dpre, &mut grad.combine)?;
            let dctx = dcomb.slice_cols(0, hw);
            dh[nl - 1].add_assign(&dcomb.slice_cols(hw, hw + d))?;
            let dq = self.attn.backward_step(
                &step.attn,
                &enc.outputs,
                &enc.keys,
                &dctx,
                &mut d_enc,
                &mut d_keys,
            )?;
            dh[nl - 1].add_assign(&dq)?;
            let mut dx = Tensor::zeros(&[0]);
            for l in (0..nl).rev() {
                let (x, hp, cp) =
                    self.dec[l].backward(&step.lstm[l], &dh[l], &dc[l], &mut grad.dec[l])?;
                dh[l] = hp;
                dc[l] = cp;
                if l > 0 {
                    dh[l - 1].add_assign(&x)?;
                } else {
                    dx = x;
                }
            }
            if t == 0 {
                for (r, s) in run.styles.iter().enumerate() {
                    for (g, &v) in grad.style.row_mut(s.index()).iter_mut().zip(dx.row(r)) {
                        *g += v;
                    }
                }
            } else {
                self.embed
                    .backward(&run.inputs[t - 1], &dx, &mut grad.embed);
            }
        }
        let mut dinit = Tensor::concat_cols(&dh.iter().collect::<Vec<_>>())?;
        for (g, &a) in dinit.data_mut().iter_mut().zip(run.init.data()) {
            *g *= T::one() - a * a;
        }
        let dz = self.bridge.backward(&enc.z, &dinit, &mut grad.bridge)?;
        self.attn
            .backward_keys(&enc.outputs, &d_keys, &mut grad.attn, &mut d_enc)?;
        self.backward_encoder(enc, &d_enc, &dz, grad)
    }

    fn backward_encoder(
        &self,
        enc: &Encoded<T>,
        d_out: &Tensor<T>,
        dz: &Tensor<T>,
        grad: &mut Self,
    ) -> Result<()> {
        let src = &enc.src;
        let (b, s) = (src.size, src.len);
        let h = self.enc_fwd[0].hidden_dim();
        let w = 2 * h;
        // gradient w.r.t. each position's layer output, starting at the top
        let mut d_layer: Vec<Tensor<T>> = (0..s)
            .map(|t| {
                let mut m = Tensor::zeros(&[b, w]);
                for r in 0..b {
                    m.row_mut(r)
                        .copy_from_slice(&d_out.data()[(r * s + t) * w..(r * s + t + 1) * w]);
                }
                m
            })
            .collect();
        let nl = self.enc_fwd.len();
        for l in (0..nl).rev() {
            let in_dim = enc.cache.inputs[l][0].cols();
            let mut d_in: Vec<Tensor<T>> = (0..s).map(|_| Tensor::zeros(&[b, in_dim])).collect();
            for (dir, cell) in [&self.enc_fwd[l], &self.enc_bwd[l]].into_iter().enumerate() {
                let run = &enc.cache.runs[l][dir];
                let cg = if dir == 0 {
                    &mut grad.enc_fwd[l]
                } else {
                    &mut grad.enc_bwd[l]
                };
                let mut carry_h = if l == nl - 1 {
                    dz.slice_cols(dir * h, (dir + 1) * h)
                } else {
                    Tensor::zeros(&[b, h])
                };
                let mut carry_c = Tensor::zeros(&[b, h]);
                let order: Vec<usize> = if dir == 0 {
                    (0..s).rev().collect()
                } else {
                    (0..s).collect()
                };
                for t in order {
                    let (_, live) = src.column(t);
                    carry_h.add_assign(&d_layer[t].slice_cols(dir * h, (dir + 1) * h))?;
                    let dhn = split_live(&mut carry_h, &live);
                    let dcn = split_live(&mut carry_c, &live);
                    let (dx, dhp, dcp) = cell.backward(&run.caches[t], &dhn, &dcn, cg)?;
                    carry_h.add_assign(&dhp)?;
                    carry_c.add_assign(&dcp)?;
                    d_in[t].add_assign(&dx)?;
                }
            }
            d_layer = d_in;
        }
        for (t, dx) in d_layer.iter().enumerate() {
            self.embed.backward(&src.column(t).0, dx, &mut grad.embed);
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::write(path, &checkpoint::entries(self, PREFIX))
    }

    pub fn from_named(stored: &NamedTensors<T>) -> Result<Self> {
        let table = checkpoint::find(stored, &format!("{PREFIX}/embed/table"))?;
        let wx0 = checkpoint::find(stored, &format!("{PREFIX}/enc/l0/fwd/wx"))?;
        let dec0 = checkpoint::find(stored, &format!("{PREFIX}/dec/l0/wh"))?;
        let layers = (0..)
            .take_while(|l| checkpoint::find(stored, &format!("{PREFIX}/dec/l{l}/wh")).is_ok())
            .count();
        let cfg = ModelConfig {
            vocab: table.rows(),
            emb_dim: table.cols(),
            enc_hidden: wx0.cols() / 4,
            dec_hidden: dec0.rows(),
            layers,
        };
        let mut net = Self::new(&mut crate::rng::stream(0, &[]), &cfg)?;
        checkpoint::load_into(&mut net, stored, PREFIX)?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_named(&checkpoint::read(path)?)
    }
}

impl<T: Scalar> Params<T> for Seq2Seq<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.embed.visit(&join_name(prefix, "embed"), out);
        out.push((join_name(prefix, "style"), &self.style));
        for (l, (f, b)) in self.enc_fwd.iter().zip(&self.enc_bwd).enumerate() {
            f.visit(&join_name(prefix, &format!("enc/l{l}/fwd")), out);
            b.visit(&join_name(prefix, &format!("enc/l{l}/bwd")), out);
        }
        self.bridge.visit(&join_name(prefix, "bridge"), out);
        for (l, c) in self.dec.iter().enumerate() {
            c.visit(&join_name(prefix, &format!("dec/l{l}")), out);
        }
        self.attn.visit(&join_name(prefix, "attn"), out);
        self.combine.visit(&join_name(prefix, "combine"), out);
        out.push((join_name(prefix, "out_bias"), &self.out_bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        self.embed.visit_mut(&join_name(prefix, "embed"), out);
        out.push((join_name(prefix, "style"), &mut self.style));
        for (l, (f, b)) in self
            .enc_fwd
            .iter_mut()
            .zip(self.enc_bwd.iter_mut())
            .enumerate()
        {
            f.visit_mut(&join_name(prefix, &format!("enc/l{l}/fwd")), out);
            b.visit_mut(&join_name(prefix, &format!("enc/l{l}/bwd")), out);
        }
        self.bridge.visit_mut(&join_name(prefix, "bridge"), out);
        for (l, c) in self.dec.iter_mut().enumerate() {
            c.visit_mut(&join_name(prefix, &format!("dec/l{l}")), out);
        }
        self.attn.visit_mut(&join_name(prefix, "attn"), out);
        self.combine.visit_mut(&join_name(prefix, "combine"), out);
        out.push((join_name(prefix, "out_bias"), &mut self.out_bias));
    }
}
