//! Text-CNN sentence-style classifier.
//!
//! Convolutions of several widths over word embeddings, ReLU, max-over-time
//! pooling, dropout, and a two-way softmax (class 0 is style X). The same
//! network accepts hard token ids or, for the style loss, position-wise
//! distributions over the vocabulary whose expected embedding is fed through.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::checkpoint::{self, NamedTensors};
use crate::corpus::{Style, StyleCorpus, PAD};
use crate::error::{contract, shape_err, Error, Result};
use crate::nn::{join_name, normal_init, Linear, Params};
use crate::optim::{clip_grad_norm, AdamState};
use crate::rng::{stream, tag};
use crate::scalar::Scalar;
use crate::tensor::{gemm_acc, Tensor};

pub const PREFIX: &str = "textcnn";

#[derive(Clone, Debug, PartialEq)]
pub struct CnnConfig {
    pub emb_dim: usize,
    pub widths: Vec<usize>,
    pub filters: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            emb_dim: 128,
            widths: vec![3, 4, 5],
            filters: 100,
            dropout: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextCnn<T> {
    /// `V × E`; the PAD row stays zero.
    pub embed: Tensor<T>,
    /// One `(w·E) × F` filter bank per width.
    pub convs: Vec<Linear<T>>,
    /// `(F·|widths|) × 2`
    pub out: Linear<T>,
    pub widths: Vec<usize>,
}

/// Hard ids or a `len × V` matrix of distributions.
#[derive(Copy, Clone, Debug)]
pub enum CnnInput<'a, T> {
    Hard(&'a [usize]),
    Soft(&'a Tensor<T>),
}

struct WidthCache<T> {
    windows: Tensor<T>,
    /// Row of the max per filter, `None` when the pooled value was clipped by ReLU.
    argmax: Vec<Option<usize>>,
}

struct Cache<T> {
    ids: Option<Vec<usize>>,
    len: usize,
    widths: Vec<WidthCache<T>>,
    features: Tensor<T>,
    keep: Option<Vec<T>>,
    probs: [T; 2],
}

impl<T: Scalar> TextCnn<T> {
    pub fn new<R: Rng>(rng: &mut R, vocab: usize, cfg: &CnnConfig) -> Result<Self> {
        if cfg.widths.is_empty()
            || cfg.widths.windows(2).any(|w| w[0] >= w[1])
            || cfg.widths[0] == 0
        {
            return Err(Error::Config(
                "classifier filter widths must be strictly increasing and positive".into(),
            ));
        }
        let mut embed = normal_init(rng, &[vocab, cfg.emb_dim], 0.1);
        embed.row_mut(PAD).fill(T::zero());
        let convs = cfg
            .widths
            .iter()
            .map(|&w| Linear::new(rng, w * cfg.emb_dim, cfg.filters))
            .collect();
        let out = Linear::new(rng, cfg.filters * cfg.widths.len(), 2);
        Ok(Self {
            embed,
            convs,
            out,
            widths: cfg.widths.clone(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.embed.rows()
    }

    pub fn emb_dim(&self) -> usize {
        self.embed.cols()
    }

    fn max_width(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Embedded input extended with zero (PAD) rows up to the widest filter.
    fn embed_input(
        &self,
        input: CnnInput<'_, T>,
    ) -> Result<(Tensor<T>, usize, Option<Vec<usize>>)> {
        let e = self.emb_dim();
        let (len, rows, ids) = match input {
            CnnInput::Hard(ids) => {
                let mut rows = Vec::with_capacity(ids.len() * e);
                for &id in ids {
                    if id >= self.vocab_size() {
                        return Err(shape_err!("token id {id} outside classifier vocabulary"));
                    }
                    rows.extend_from_slice(self.embed.row(id));
                }
                (ids.len(), rows, Some(ids.to_vec()))
            }
            CnnInput::Soft(p) => {
                if p.shape().len() != 2 || p.cols() != self.vocab_size() {
                    return Err(shape_err!(
                        "soft input {:?} against vocabulary {}",
                        p.shape(),
                        self.vocab_size()
                    ));
                }
                let mut rows = vec![T::zero(); p.rows() * e];
                gemm_acc(
                    p.data(),
                    self.embed.data(),
                    &mut rows,
                    p.rows(),
                    self.vocab_size(),
                    e,
                );
                (p.rows(), rows, None)
            }
        };
        if len == 0 {
            return Err(contract!("classifier input is empty"));
        }
        let padded = len.max(self.max_width());
        let mut rows = rows;
        rows.resize(padded * e, T::zero());
        Ok((Tensor::from_vec(&[padded, e], rows)?, len, ids))
    }

    fn forward_cached<R: Rng>(
        &self,
        input: CnnInput<'_, T>,
        dropout: Option<(f64, &mut R)>,
    ) -> Result<Cache<T>> {
        let (x, len, ids) = self.embed_input(input)?;
        let e = self.emb_dim();
        let n = x.rows();
        let f = self.convs[0].output_dim();
        let mut features = Vec::with_capacity(f * self.widths.len());
        let mut widths = Vec::with_capacity(self.widths.len());
        for (conv, &w) in self.convs.iter().zip(&self.widths) {
            let npos = n - w + 1;
            let mut win = Vec::with_capacity(npos * w * e);
            for i in 0..npos {
                win.extend_from_slice(&x.data()[i * e..(i + w) * e]);
            }
            let windows = Tensor::from_vec(&[npos, w * e], win)?;
            let act = conv.forward(&windows)?;
            let mut argmax = vec![None; f];
            for (k, am) in argmax.iter_mut().enumerate() {
                let mut best = T::zero();
                for i in 0..npos {
                    let v = act.get(i, k);
                    if v > best {
                        best = v;
                        *am = Some(i);
                    }
                }
                features.push(best);
            }
            widths.push(WidthCache { windows, argmax });
        }
        let keep = dropout.map(|(p, rng)| {
            let scale = T::lit(1.0 / (1.0 - p));
            let mask: Vec<T> = (0..features.len())
                .map(|_| if rng.gen_bool(p) { T::zero() } else { scale })
                .collect();
            for (v, m) in features.iter_mut().zip(&mask) {
                *v *= *m;
            }
            mask
        });
        let features = Tensor::from_vec(&[1, features.len()], features)?;
        let logits = self.out.forward(&features)?;
        let (a, b) = (logits.data()[0], logits.data()[1]);
        let m = a.max(b);
        let (ea, eb) = ((a - m).exp(), (b - m).exp());
        let probs = [ea / (ea + eb), eb / (ea + eb)];
        Ok(Cache {
            ids,
            len,
            widths,
            features,
            keep,
            probs,
        })
    }

    /// Probabilities `[P(X), P(Y)]` in evaluation mode.
    pub fn forward(&self, input: CnnInput<'_, T>) -> Result<[T; 2]> {
        Ok(self
            .forward_cached::<rand_chacha::ChaCha8Rng>(input, None)?
            .probs)
    }

    /// Back-propagates `dlogits`; accumulates into `grad` when given and returns
    /// the gradient with respect to the unpadded embedded input (`len × E`).
    fn backward(
        &self,
        cache: &Cache<T>,
        dlogits: [T; 2],
        mut grad: Option<&mut Self>,
    ) -> Result<Tensor<T>> {
        let e = self.emb_dim();
        let f = self.convs[0].output_dim();
        let dl = Tensor::from_vec(&[1, 2], dlogits.to_vec())?;
        let mut dfeat = match grad.as_deref_mut() {
            Some(g) => self.out.backward(&cache.features, &dl, &mut g.out)?,
            None => dl.matmul_nt(&self.out.weight)?,
        };
        if let Some(keep) = &cache.keep {
            for (d, m) in dfeat.data_mut().iter_mut().zip(keep) {
                *d *= *m;
            }
        }
        let n = cache.widths[0].windows.rows() + self.widths[0] - 1;
        let mut dx = vec![T::zero(); n * e];
        for (wi, (conv, wc)) in self.convs.iter().zip(&cache.widths).enumerate() {
            let w = self.widths[wi];
            let npos = wc.windows.rows();
            let mut dact = Tensor::zeros(&[npos, f]);
            for (k, am) in wc.argmax.iter().enumerate() {
                if let Some(i) = am {
                    dact.set(*i, k, dfeat.data()[wi * f + k]);
                }
            }
            let dwin = match grad.as_deref_mut() {
                Some(g) => conv.backward(&wc.windows, &dact, &mut g.convs[wi])?,
                None => dact.matmul_nt(&conv.weight)?,
            };
            for i in 0..npos {
                for (a, &v) in dx[i * e..(i + w) * e].iter_mut().zip(dwin.row(i)) {
                    *a += v;
                }
            }
        }
        dx.truncate(cache.len * e);
        let dx = Tensor::from_vec(&[cache.len, e], dx)?;
        if let (Some(g), Some(ids)) = (grad, &cache.ids) {
            for (r, &id) in ids.iter().enumerate() {
                if id != PAD {
                    for (a, &v) in g.embed.row_mut(id).iter_mut().zip(dx.row(r)) {
                        *a += v;
                    }
                }
            }
        }
        Ok(dx)
    }

    /// Mean cross-entropy of a labeled batch; accumulates parameter gradients.
    pub fn loss_and_grad<R: Rng>(
        &self,
        batch: &[(&[usize], Style)],
        dropout: Option<(f64, &mut R)>,
        grad: &mut Self,
    ) -> Result<T> {
        if batch.is_empty() {
            return Err(contract!("empty classifier batch"));
        }
        let inv = T::one() / T::from_usize(batch.len()).unwrap();
        let mut loss = T::zero();
        let mut dropout = dropout;
        for &(ids, style) in batch {
            let d = dropout.as_mut().map(|(p, r)| (*p, &mut **r));
            let cache = self.forward_cached(CnnInput::Hard(ids), d)?;
            let t = style.index();
            loss -= cache.probs[t].max(T::lit(1e-300)).ln();
            let mut dl = cache.probs;
            dl[t] -= T::one();
            self.backward(&cache, [dl[0] * inv, dl[1] * inv], Some(grad))?;
        }
        Ok(loss * inv)
    }

    pub fn predict(&self, ids: &[usize]) -> Result<Style> {
        let p = self.forward(CnnInput::Hard(ids))?;
        Ok(if p[0] >= p[1] { Style::X } else { Style::Y })
    }

    /// `P(target | sentence)`.
    pub fn sty_score(&self, ids: &[usize], target: Style) -> Result<T> {
        Ok(self.forward(CnnInput::Hard(ids))?[target.index()])
    }

    /// `−log P(target)` of the expected-embedding input and its gradient with
    /// respect to the distributions. Parameters are not touched.
    pub fn style_loss(&self, dists: &Tensor<T>, target: Style) -> Result<(T, Tensor<T>)> {
        let cache = self.forward_cached::<rand_chacha::ChaCha8Rng>(CnnInput::Soft(dists), None)?;
        let t = target.index();
        let loss = -cache.probs[t].max(T::lit(1e-300)).ln();
        let mut dl = cache.probs;
        dl[t] -= T::one();
        let dx = self.backward(&cache, dl, None)?;
        let dp = dx.matmul_nt(&self.embed)?;
        Ok((loss, dp))
    }

    pub fn accuracy(&self, examples: &[(&[usize], Style)]) -> Result<f64> {
        if examples.is_empty() {
            return Err(contract!("accuracy over an empty set"));
        }
        let mut hits = 0usize;
        for &(ids, s) in examples {
            if self.predict(ids)? == s {
                hits += 1;
            }
        }
        Ok(hits as f64 / examples.len() as f64)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::write(path, &checkpoint::entries(self, PREFIX))
    }

    /// Rebuilds the network from stored tensors; widths come from the tensor names.
    pub fn from_named(stored: &NamedTensors<T>) -> Result<Self> {
        let embed = checkpoint::find(stored, &join_name(PREFIX, "embed"))?.clone();
        let mut widths: Vec<usize> = stored
            .iter()
            .filter_map(|(n, _)| {
                n.strip_prefix(&format!("{PREFIX}/conv"))?
                    .strip_suffix("/w")?
                    .parse()
                    .ok()
            })
            .collect();
        widths.sort_unstable();
        if widths.is_empty() {
            return Err(Error::Format {
                what: "classifier checkpoint",
                msg: "no convolution filters".into(),
            });
        }
        let filters = checkpoint::find(stored, &format!("{PREFIX}/conv{}/w", widths[0]))?.cols();
        let mut net = Self {
            convs: widths
                .iter()
                .map(|&w| {
                    Linear::from_parts(
                        Tensor::zeros(&[w * embed.cols(), filters]),
                        Tensor::zeros(&[filters]),
                    )
                })
                .collect::<Result<_>>()?,
            out: Linear::from_parts(
                Tensor::zeros(&[filters * widths.len(), 2]),
                Tensor::zeros(&[2]),
            )?,
            embed,
            widths,
        };
        checkpoint::load_into(&mut net, stored, PREFIX)?;
        Ok(net)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_named(&checkpoint::read(path)?)
    }
}

impl<T: Scalar> Params<T> for TextCnn<T> {
    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((join_name(prefix, "embed"), &self.embed));
        for (conv, w) in self.convs.iter().zip(&self.widths) {
            conv.visit(&join_name(prefix, &format!("conv{w}")), out);
        }
        self.out.visit(&join_name(prefix, "out"), out);
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor<T>)>) {
        out.push((join_name(prefix, "embed"), &mut self.embed));
        for (conv, w) in self.convs.iter_mut().zip(&self.widths) {
            conv.visit_mut(&join_name(prefix, &format!("conv{w}")), out);
        }
        self.out.visit_mut(&join_name(prefix, "out"), out);
    }
}

#[derive(Clone, Debug)]
pub struct ClassifierTraining {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 64,
            lr: 1e-3,
            clip: 5.0,
        }
    }
}

/// Every sentence of the given corpora paired with its corpus style.
pub fn labeled<'a>(corpora: &[&'a StyleCorpus]) -> Vec<(&'a [usize], Style)> {
    corpora
        .iter()
        .flat_map(|c| c.sentences.iter().map(move |s| (s.ids.as_slice(), c.style)))
        .filter(|(ids, _)| !ids.is_empty())
        .collect()
}

/// Adam on cross-entropy; returns the snapshot with the best dev accuracy.
pub fn train_classifier(
    train: &[(&[usize], Style)],
    dev: &[(&[usize], Style)],
    vocab: usize,
    cfg: &CnnConfig,
    hyper: &ClassifierTraining,
    seed: u64,
) -> Result<(TextCnn<f64>, f64)> {
    if !Style::BOTH.iter().all(|s| train.iter().any(|e| e.1 == *s)) {
        return Err(contract!(
            "classifier training needs sentences of both styles"
        ));
    }
    if dev.is_empty() {
        return Err(contract!("classifier training needs a dev set"));
    }
    let mut net = TextCnn::new(&mut stream(seed, &[tag::INIT]), vocab, cfg)?;
    let mut adam = AdamState::new(hyper.lr);
    let mut grad = net.zeros_like();
    let mut best = (net.clone(), net.accuracy(dev)?);
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut stream(seed, &[tag::BATCH, epoch as u64]));
        let mut drop_rng = stream(seed, &[tag::DROPOUT, epoch as u64]);
        let mut total = 0.0;
        let mut steps = 0usize;
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            let batch: Vec<(&[usize], Style)> = chunk.iter().map(|&i| train[i]).collect();
            grad.zero();
            let d = (cfg.dropout > 0.0).then_some((cfg.dropout, &mut drop_rng));
            total += net.loss_and_grad(&batch, d, &mut grad)?;
            steps += 1;
            grad.embed.row_mut(PAD).fill(0.0);
            clip_grad_norm(&mut grad, hyper.clip);
            adam.update(&mut net, &grad)?;
            net.embed.row_mut(PAD).fill(0.0);
        }
        let acc = net.accuracy(dev)?;
        log::info!(
            "classifier epoch {} loss {:.4} dev acc {:.4}",
            epoch + 1,
            total / steps.max(1) as f64,
            acc
        );
        if acc > best.1 {
            best = (net.clone(), acc);
        }
    }
    Ok(best)
}
