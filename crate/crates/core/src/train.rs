//! Two-phase training: denoising style modeling, then iterative
//! back-translation on refined pseudo-parallel pairs.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::checkpoint;
use crate::classifier::TextCnn;
use crate::corpus::{make_batches, Style, StyleCorpus, TokenSeq, Vocab};
use crate::error::{contract, Error, Result};
use crate::eval::{bleu_corpus, g2_h2, transfer_accuracy};
use crate::lexicon::{StyleLexicon, StyleWords};
use crate::model::{self, ModelConfig, Seq2Seq, SrcBatch};
use crate::nn::Params;
use crate::noise::{dae_corrupt, pollute, NoiseSpec};
use crate::optim::{clip_grad_norm, AdamState};
use crate::refine::{emit_pairs, refinement_stats, CandidateSet, RefinementStats, Scorer};
use crate::rng::{derive_seed, stream, tag};
use crate::tensor::Tensor;
use crate::wmd::WordEmbeddings;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub emb_dim: usize,
    pub enc_hidden: usize,
    pub dec_hidden: usize,
    pub layers: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub clip: f64,
    pub lambda: f64,
    pub warmup_epochs: usize,
    pub bt_epochs: usize,
    pub patience: usize,
    pub use_classifier: bool,
    pub use_refinement: bool,
    pub use_style_noise: bool,
    /// Also apply drop/shuffle noise to refined sources during back-translation.
    pub bt_dae_noise: bool,
    /// Add the style-modeling loss to every back-translation step.
    pub bt_style_modeling: bool,
    pub noise: NoiseSpec,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            emb_dim: 512,
            enc_hidden: 512,
            dec_hidden: 512,
            layers: 2,
            batch_size: 64,
            lr: 1e-4,
            clip: 5.0,
            lambda: 0.3,
            warmup_epochs: 5,
            bt_epochs: 10,
            patience: 5,
            use_classifier: true,
            use_refinement: true,
            use_style_noise: true,
            bt_dae_noise: false,
            bt_style_modeling: false,
            noise: NoiseSpec::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda {} not in [0,1]",
                self.lambda
            )));
        }
        if self.batch_size == 0 || self.lr <= 0.0 {
            return Err(Error::Config(
                "batch size and learning rate must be positive".into(),
            ));
        }
        self.noise.validate()
    }

    pub fn model_config(&self, vocab: usize) -> ModelConfig {
        ModelConfig {
            vocab,
            emb_dim: self.emb_dim,
            enc_hidden: self.enc_hidden,
            dec_hidden: self.dec_hidden,
            layers: self.layers,
        }
    }

    /// Effective λ: the style term needs a classifier.
    pub fn effective_lambda(&self) -> f64 {
        if self.use_classifier {
            self.lambda
        } else {
            1.0
        }
    }
}

/// Everything the driver reads but never changes.
pub struct Resources<'a> {
    pub vocab: &'a Vocab,
    /// Indexed by `Style::index()`.
    pub train: [&'a StyleCorpus; 2],
    pub dev: [&'a StyleCorpus; 2],
    pub lexicon: &'a StyleLexicon,
    /// The frozen training classifier: style loss, CS scores, WMD embeddings and dev accuracy.
    pub classifier: &'a TextCnn<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 0 is the model after warmup.
    pub epoch: usize,
    pub train_loss: f64,
    pub acc: f64,
    pub bleu: f64,
    pub g2: f64,
    pub h2: f64,
    pub refinement: Option<RefinementStats>,
}

impl EpochRecord {
    pub fn log_line(&self) -> String {
        format!(
            "epoch {} acc {:.2} bleu {:.2} g2 {:.2} h2 {:.2}",
            self.epoch, self.acc, self.bleu, self.g2, self.h2
        )
    }
}

#[derive(Clone)]
pub struct Trainer {
    pub model: Seq2Seq<f64>,
    pub adam: AdamState<f64>,
    grad: Seq2Seq<f64>,
}

/// Greedy transfer of every sentence to `styles[i]`. Sentences are grouped by
/// length into fixed batches, so the result does not depend on the pool size.
pub fn translate_all(
    model: &Seq2Seq<f64>,
    sources: &[&[usize]],
    styles: &[Style],
    batch_size: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.sort_by_key(|&i| (sources[i].len(), i));
    let chunks: Vec<&[usize]> = order.chunks(batch_size.max(1)).collect();
    let decoded: Vec<Vec<Vec<usize>>> = chunks
        .par_iter()
        .map(|chunk| {
            let seqs: Vec<&[usize]> = chunk.iter().map(|&i| sources[i]).collect();
            let st: Vec<Style> = chunk.iter().map(|&i| styles[i]).collect();
            let out = model.greedy(&SrcBatch::new(&seqs)?, &st)?;
            Ok(out.into_iter().map(|d| d.ids).collect())
        })
        .collect::<Result<_>>()?;
    let mut result = vec![Vec::new(); sources.len()];
    for (chunk, outs) in chunks.iter().zip(decoded) {
        for (&i, o) in chunk.iter().zip(outs) {
            result[i] = o;
        }
    }
    Ok(result)
}

/// Accuracy under `cls` and self-BLEU against the sources, averaged over both directions.
pub fn dev_metrics(
    model: &Seq2Seq<f64>,
    dev: [&StyleCorpus; 2],
    cls: &TextCnn<f64>,
    batch: usize,
) -> Result<(f64, f64)> {
    let (mut acc, mut bleu) = (0.0, 0.0);
    for style in Style::BOTH {
        let corpus = dev[style.index()];
        let src: Vec<&[usize]> = corpus
            .sentences
            .iter()
            .map(|s| s.ids.as_slice())
            .filter(|s| !s.is_empty())
            .collect();
        let target = style.opposite();
        let out = translate_all(model, &src, &vec![target; src.len()], batch)?;
        acc += transfer_accuracy(&out, target, cls)?;
        let hyps: Vec<Vec<String>> = out
            .iter()
            .map(|o| o.iter().map(|i| i.to_string()).collect())
            .collect();
        let refs: Vec<Vec<Vec<String>>> = src
            .iter()
            .map(|s| vec![s.iter().map(|i| i.to_string()).collect()])
            .collect();
        bleu += bleu_corpus(&hyps, &refs)?;
    }
    Ok((acc / 2.0, bleu / 2.0))
}

impl Trainer {
    pub fn new(cfg: &TrainConfig, vocab: usize) -> Result<Self> {
        cfg.validate()?;
        let model = Seq2Seq::new(
            &mut stream(cfg.seed, &[tag::INIT]),
            &cfg.model_config(vocab),
        )?;
        let grad = model.zeros_like();
        Ok(Self {
            model,
            adam: AdamState::new(cfg.lr),
            grad,
        })
    }

    pub fn from_model(model: Seq2Seq<f64>, adam: AdamState<f64>) -> Self {
        let grad = model.zeros_like();
        Self { model, adam, grad }
    }

    /// Writes the model and the optimizer moments, so training can resume exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut entries = checkpoint::entries(&self.model, model::PREFIX);
        let names: Vec<String> = self.model.named().into_iter().map(|(n, _)| n).collect();
        let step = Tensor::from_vec(&[1], vec![self.adam.step as f64])?;
        entries.push(("adam/step".to_string(), &step));
        for (k, n) in names.iter().enumerate() {
            if let (Some(m), Some(v)) = (
                self.adam.first_moment.get(k),
                self.adam.second_moment.get(k),
            ) {
                entries.push((format!("adam/m/{n}"), m));
                entries.push((format!("adam/v/{n}"), v));
            }
        }
        checkpoint::write(path, &entries)
    }

    /// Reads a checkpoint written by [`Trainer::save`]; a plain model
    /// checkpoint starts with fresh moments.
    pub fn load(path: &Path, lr: f64) -> Result<Self> {
        let stored = checkpoint::read(path)?;
        let model = Seq2Seq::from_named(&stored)?;
        let mut adam = AdamState::new(lr);
        if let Ok(step) = checkpoint::find(&stored, "adam/step") {
            adam.step = step.data()[0] as u64;
            let mut first = Vec::new();
            let mut second = Vec::new();
            for (n, t) in model.named() {
                let m = checkpoint::find(&stored, &format!("adam/m/{n}"))?;
                let v = checkpoint::find(&stored, &format!("adam/v/{n}"))?;
                if m.shape() != t.shape() || v.shape() != t.shape() {
                    return Err(Error::Format {
                        what: "checkpoint",
                        msg: format!("optimizer moments for {n} have the wrong shape"),
                    });
                }
                first.push(m.clone());
                second.push(v.clone());
            }
            if adam.step > 0 {
                adam.first_moment = first;
                adam.second_moment = second;
            }
        }
        Ok(Self::from_model(model, adam))
    }

    fn step(&mut self, clip: f64) -> Result<()> {
        if !self.grad.all_finite() {
            return Err(Error::Numeric(
                "non-finite gradient; training diverged".into(),
            ));
        }
        clip_grad_norm(&mut self.grad, clip);
        self.adam.update(&mut self.model, &self.grad)?;
        self.grad.zero();
        Ok(())
    }

    /// Style-modeling loss of one X batch and one Y batch; accumulates gradients.
    fn style_modeling(
        &mut self,
        cfg: &TrainConfig,
        x: &[&TokenSeq],
        y: &[&TokenSeq],
        key: &[u64],
    ) -> Result<f64> {
        let mut total = 0.0;
        for (k, side) in [x, y].into_iter().enumerate() {
            if side.is_empty() {
                continue;
            }
            let noisy: Vec<TokenSeq> = side
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut parts = key.to_vec();
                    parts.extend([k as u64, i as u64]);
                    dae_corrupt(s, &cfg.noise, &mut stream(cfg.seed, &parts))
                })
                .collect();
            let src: Vec<&[usize]> = noisy.iter().map(|s| s.ids.as_slice()).collect();
            let tgt: Vec<&[usize]> = side.iter().map(|s| s.ids.as_slice()).collect();
            let styles: Vec<Style> = side.iter().map(|s| s.style).collect();
            total += self
                .model
                .mle(&src, &styles, &tgt, 1.0, Some(&mut self.grad))?;
        }
        Ok(total)
    }

    /// One epoch of denoising reconstruction with paired X/Y batches.
    pub fn warmup_epoch(
        &mut self,
        cfg: &TrainConfig,
        train: [&StyleCorpus; 2],
        epoch: usize,
    ) -> Result<f64> {
        let bx = make_batches(
            train[0],
            cfg.batch_size,
            derive_seed(cfg.seed, &[tag::BATCH, 0, epoch as u64, 0]),
        );
        let by = make_batches(
            train[1],
            cfg.batch_size,
            derive_seed(cfg.seed, &[tag::BATCH, 0, epoch as u64, 1]),
        );
        if bx.is_empty() || by.is_empty() {
            return Err(contract!("style modeling needs sentences of both styles"));
        }
        let steps = bx.len().max(by.len());
        let mut total = 0.0;
        for i in 0..steps {
            let x: Vec<&TokenSeq> = bx[i % bx.len()]
                .indices
                .iter()
                .map(|&j| &train[0].sentences[j])
                .collect();
            let y: Vec<&TokenSeq> = by[i % by.len()]
                .indices
                .iter()
                .map(|&j| &train[1].sentences[j])
                .collect();
            total +=
                self.style_modeling(cfg, &x, &y, &[tag::DAE_NOISE, 0, epoch as u64, i as u64])?;
            self.step(cfg.clip)?;
        }
        let mean = total / steps as f64;
        log::info!("warmup epoch {} loss {:.4}", epoch + 1, mean);
        Ok(mean)
    }

    /// Back-translates every training sentence with the current snapshot and
    /// offers the results to the candidate sets.
    pub fn refresh_candidates(
        &self,
        cfg: &TrainConfig,
        res: &Resources<'_>,
        scorer: &Scorer<'_>,
        sets: &mut [Vec<CandidateSet>; 2],
        epoch: usize,
    ) -> Result<()> {
        for style in Style::BOTH {
            let corpus = res.train[style.index()];
            let src: Vec<&[usize]> = corpus.sentences.iter().map(|s| s.ids.as_slice()).collect();
            let target = style.opposite();
            let out = translate_all(&self.model, &src, &vec![target; src.len()], cfg.batch_size)?;
            let scores: Vec<f64> = out
                .par_iter()
                .zip(&src)
                .map(|(cand, orig)| scorer.cs_score(cand, orig, target))
                .collect::<Result<_>>()?;
            for ((set, ids), cs) in sets[style.index()].iter_mut().zip(out).zip(scores) {
                let cand = TokenSeq::from_ids(ids, target, res.vocab);
                set.offer(cand, cs, epoch, !cfg.use_refinement);
            }
        }
        Ok(())
    }

    /// One epoch of the transfer objective on refined pairs.
    pub fn transfer_epoch(
        &mut self,
        cfg: &TrainConfig,
        res: &Resources<'_>,
        sets: &[Vec<CandidateSet>; 2],
        epoch: usize,
    ) -> Result<f64> {
        let originals = [
            res.train[0].sentences.as_slice(),
            res.train[1].sentences.as_slice(),
        ];
        let all: Vec<CandidateSet> = sets.iter().flatten().cloned().collect();
        let mut pairs = emit_pairs(&all, originals);
        if pairs.is_empty() {
            return Err(contract!("no pseudo-parallel pairs in epoch {epoch}"));
        }
        pairs.shuffle(&mut stream(cfg.seed, &[tag::PAIRS, epoch as u64]));
        let words: [StyleWords; 2] = [
            res.lexicon.words(Style::X, res.vocab),
            res.lexicon.words(Style::Y, res.vocab),
        ];
        let p_sn = if cfg.use_style_noise {
            cfg.noise.p_sn
        } else {
            0.0
        };
        let lambda = cfg.effective_lambda();
        let mut total = 0.0;
        let steps = pairs.len().div_ceil(cfg.batch_size);
        for (b, chunk) in pairs.chunks(cfg.batch_size).enumerate() {
            let mut sources = Vec::with_capacity(chunk.len());
            for (i, p) in chunk.iter().enumerate() {
                let side = &words[p.source.style.index()];
                let mut rng = stream(cfg.seed, &[tag::POLLUTE, epoch as u64, b as u64, i as u64]);
                let mut s = if p_sn > 0.0 && !side.is_empty() {
                    pollute(&p.source, side, p_sn, cfg.noise.pollute_mode, &mut rng)?
                } else {
                    p.source.clone()
                };
                if cfg.bt_dae_noise {
                    s = dae_corrupt(&s, &cfg.noise, &mut rng);
                }
                sources.push(s);
            }
            let src: Vec<&[usize]> = sources.iter().map(|s| s.ids.as_slice()).collect();
            let tgt: Vec<&[usize]> = chunk.iter().map(|p| p.target.ids.as_slice()).collect();
            let styles: Vec<Style> = chunk.iter().map(|p| p.target.style).collect();
            let mut loss = transfer_loss(
                &self.model,
                &src,
                &styles,
                &tgt,
                res.classifier,
                lambda,
                Some(&mut self.grad),
            )?;
            if cfg.bt_style_modeling {
                let xs: Vec<&TokenSeq> = chunk
                    .iter()
                    .filter(|p| p.target.style == Style::X)
                    .map(|p| &p.target)
                    .collect();
                let ys: Vec<&TokenSeq> = chunk
                    .iter()
                    .filter(|p| p.target.style == Style::Y)
                    .map(|p| &p.target)
                    .collect();
                loss += self.style_modeling(
                    cfg,
                    &xs,
                    &ys,
                    &[tag::DAE_NOISE, 1, epoch as u64, b as u64],
                )?;
            }
            total += loss;
            self.step(cfg.clip)?;
        }
        Ok(total / steps as f64)
    }
}

/// `λ·L_MLE + (1−λ)·L_style` of one batch of refined pairs. `src` are the
/// (polluted) generated sentences, `tgt` the originals in `styles`; the style
/// term drives the free-running transfer of `tgt` into the opposite style.
pub fn transfer_loss(
    model: &Seq2Seq<f64>,
    src: &[&[usize]],
    styles: &[Style],
    tgt: &[&[usize]],
    classifier: &TextCnn<f64>,
    lambda: f64,
    mut grad: Option<&mut Seq2Seq<f64>>,
) -> Result<f64> {
    let mut loss = 0.0;
    if lambda > 0.0 {
        loss += lambda * model.mle(src, styles, tgt, lambda, grad.as_deref_mut())?;
    }
    if lambda < 1.0 {
        let flipped: Vec<Style> = styles.iter().map(|s| s.opposite()).collect();
        loss += (1.0 - lambda) * model.style_loss(tgt, &flipped, classifier, 1.0 - lambda, grad)?;
    }
    Ok(loss)
}

pub struct TrainOutcome {
    /// The snapshot with the best dev G2.
    pub model: Seq2Seq<f64>,
    pub best_epoch: usize,
    pub records: Vec<EpochRecord>,
    pub sets: [Vec<CandidateSet>; 2],
}

/// Warmup epochs from a fresh initialisation.
pub fn pretrain(cfg: &TrainConfig, res: &Resources<'_>) -> Result<Trainer> {
    let mut trainer = Trainer::new(cfg, res.vocab.len())?;
    for epoch in 0..cfg.warmup_epochs {
        trainer.warmup_epoch(cfg, res.train, epoch)?;
    }
    Ok(trainer)
}

/// Back-translation phase starting from a warmed-up trainer. `observe` sees
/// each epoch's record, model and candidate sets.
pub fn iterate(
    cfg: &TrainConfig,
    res: &Resources<'_>,
    mut trainer: Trainer,
    observe: &mut dyn FnMut(&EpochRecord, &Seq2Seq<f64>, &[Vec<CandidateSet>; 2]) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let emb = WordEmbeddings::normalized(&res.classifier.embed);
    let scorer = Scorer {
        embeddings: &emb,
        classifier: cfg.use_classifier.then_some(res.classifier),
    };
    let mut sets: [Vec<CandidateSet>; 2] = [
        (0..res.train[0].len())
            .map(|i| CandidateSet::new(i, Style::X))
            .collect(),
        (0..res.train[1].len())
            .map(|i| CandidateSet::new(i, Style::Y))
            .collect(),
    ];
    let record = |epoch, loss, model: &Seq2Seq<f64>, refinement| -> Result<EpochRecord> {
        let (acc, bleu) = dev_metrics(model, res.dev, res.classifier, cfg.batch_size)?;
        let (g2, h2) = g2_h2(acc, bleu);
        Ok(EpochRecord {
            epoch,
            train_loss: loss,
            acc,
            bleu,
            g2,
            h2,
            refinement,
        })
    };
    let first = record(0, f64::NAN, &trainer.model, None)?;
    log::info!("{}", first.log_line());
    observe(&first, &trainer.model, &sets)?;
    let mut best = (trainer.model.clone(), 0usize, first.g2);
    let mut records = vec![first];
    let mut stale = 0usize;
    for epoch in 1..=cfg.bt_epochs {
        trainer.refresh_candidates(cfg, res, &scorer, &mut sets, epoch)?;
        let all: Vec<CandidateSet> = sets.iter().flatten().cloned().collect();
        let originals = [
            res.train[0].sentences.as_slice(),
            res.train[1].sentences.as_slice(),
        ];
        let stats = refinement_stats(&all, epoch, &scorer, originals)?;
        let loss = trainer.transfer_epoch(cfg, res, &sets, epoch)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite transfer loss at epoch {epoch}"
            )));
        }
        let rec = record(epoch, loss, &trainer.model, Some(stats))?;
        log::info!(
            "{} loss {:.4} cs {:.4} updated {:.3}",
            rec.log_line(),
            loss,
            rec.refinement.as_ref().unwrap().mean_cs,
            rec.refinement.as_ref().unwrap().update_fraction
        );
        observe(&rec, &trainer.model, &sets)?;
        if rec.g2 > best.2 {
            best = (trainer.model.clone(), epoch, rec.g2);
            stale = 0;
        } else {
            stale += 1;
        }
        records.push(rec);
        if stale >= cfg.patience {
            log::info!("early stop after epoch {epoch}: no dev G2 gain for {stale} epochs");
            break;
        }
    }
    Ok(TrainOutcome {
        model: best.0,
        best_epoch: best.1,
        records,
        sets,
    })
}
