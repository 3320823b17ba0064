//! Data loading and evaluation glue shared by the CLI and the tests.

use std::path::Path;

use crate::classifier::{labeled, train_classifier, ClassifierTraining, CnnConfig, TextCnn};
use crate::corpus::{
    build_vocab, corpus_path, load_corpus, tokenize, Split, Style, StyleCorpus, StyleNames, Vocab,
};
use crate::error::{Error, Result};
use crate::eval::{bleu_corpus, transfer_accuracy, DirectionScore, EvalReport};
use crate::lexicon::{extract_lexicon, train_word_lr, LrConfig, StyleLexicon};
use crate::model::Seq2Seq;
use crate::synth::{ref_path, ToyCorpus};
use crate::train::translate_all;

/// Encoded corpora of both styles for every split, plus optional test references.
pub struct Data {
    pub names: StyleNames,
    pub vocab: Vocab,
    pub train: [StyleCorpus; 2],
    pub dev: [StyleCorpus; 2],
    pub test: [StyleCorpus; 2],
    /// `refs[style][line]`: tokenized references of test line `line`.
    pub refs: [Vec<Vec<Vec<String>>>; 2],
}

fn pair<T>(f: impl Fn(Style) -> Result<T>) -> Result<[T; 2]> {
    Ok([f(Style::X)?, f(Style::Y)?])
}

impl Data {
    /// Reads `{train,dev,test}.<name>` and any `test.<name>.ref<k>` files. The
    /// vocabulary is built from the training split unless one is given.
    pub fn load(
        dir: &Path,
        names: &StyleNames,
        vocab: Option<Vocab>,
        min_count: usize,
    ) -> Result<Self> {
        let train = pair(|s| {
            load_corpus(
                &corpus_path(dir, Split::Train, names.name(s)),
                s,
                Split::Train,
                None,
            )
        })?;
        let vocab = vocab.unwrap_or_else(|| build_vocab(&[&train[0], &train[1]], min_count));
        let mut train = train;
        train.iter_mut().for_each(|c| c.encode(&vocab));
        let dev = pair(|s| {
            load_corpus(
                &corpus_path(dir, Split::Dev, names.name(s)),
                s,
                Split::Dev,
                Some(&vocab),
            )
        })?;
        let test = pair(|s| {
            load_corpus(
                &corpus_path(dir, Split::Test, names.name(s)),
                s,
                Split::Test,
                Some(&vocab),
            )
        })?;
        let refs = pair(|s| {
            let mut per_line: Vec<Vec<Vec<String>>> = vec![Vec::new(); test[s.index()].len()];
            for k in 0.. {
                let p = ref_path(dir, names.name(s), k);
                if !p.exists() {
                    break;
                }
                let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                let lines: Vec<&str> = text.lines().collect();
                if lines.len() != per_line.len() {
                    return Err(Error::Format {
                        what: "reference file",
                        msg: format!(
                            "{} has {} lines, test has {}",
                            p.display(),
                            lines.len(),
                            per_line.len()
                        ),
                    });
                }
                for (slot, l) in per_line.iter_mut().zip(lines) {
                    slot.push(tokenize(l));
                }
            }
            Ok(per_line)
        })?;
        Ok(Self {
            names: names.clone(),
            vocab,
            train,
            dev,
            test,
            refs,
        })
    }

    pub fn from_toy(toy: &ToyCorpus, min_count: usize) -> Self {
        let build = |split: Split, lines: &[Vec<String>; 2], vocab: Option<&Vocab>| {
            [
                StyleCorpus::from_lines(&lines[0], Style::X, split, vocab),
                StyleCorpus::from_lines(&lines[1], Style::Y, split, vocab),
            ]
        };
        let mut train = build(Split::Train, &toy.train, None);
        let vocab = build_vocab(&[&train[0], &train[1]], min_count);
        train.iter_mut().for_each(|c| c.encode(&vocab));
        let dev = build(Split::Dev, &toy.dev, Some(&vocab));
        let test = build(Split::Test, &toy.test, Some(&vocab));
        let refs = [0, 1].map(|s| {
            (0..toy.test[s].len())
                .map(|i| toy.refs[s].iter().map(|r| tokenize(&r[i])).collect())
                .collect()
        });
        Self {
            names: toy.names.clone(),
            vocab,
            train,
            dev,
            test,
            refs,
        }
    }

    pub fn train_refs(&self) -> [&StyleCorpus; 2] {
        [&self.train[0], &self.train[1]]
    }

    pub fn dev_refs(&self) -> [&StyleCorpus; 2] {
        [&self.dev[0], &self.dev[1]]
    }

    pub fn has_refs(&self) -> bool {
        self.refs
            .iter()
            .all(|side| !side.is_empty() && side.iter().all(|r| !r.is_empty()))
    }

    pub fn classifier(
        &self,
        cfg: &CnnConfig,
        hyper: &ClassifierTraining,
        seed: u64,
    ) -> Result<(TextCnn<f64>, f64)> {
        let train = labeled(&[&self.train[0], &self.train[1]]);
        let dev = labeled(&[&self.dev[0], &self.dev[1]]);
        train_classifier(&train, &dev, self.vocab.len(), cfg, hyper, seed)
    }

    pub fn lexicon(&self, lr: &LrConfig, threshold: f64) -> Result<StyleLexicon> {
        let fit = train_word_lr(&self.train[0], &self.train[1], self.vocab.len(), lr)?;
        Ok(extract_lexicon(&fit.coef, threshold))
    }
}

/// Test-set transfer outputs per source style.
pub struct Transferred {
    pub outputs: [Vec<Vec<usize>>; 2],
}

pub fn transfer_test(model: &Seq2Seq<f64>, data: &Data, batch: usize) -> Result<Transferred> {
    let outputs = pair(|s| {
        let src: Vec<&[usize]> = data.test[s.index()]
            .sentences
            .iter()
            .map(|t| t.ids.as_slice())
            .collect();
        translate_all(model, &src, &vec![s.opposite(); src.len()], batch)
    })?;
    Ok(Transferred { outputs })
}

/// BLEU of outputs against the given references, on surface tokens.
pub fn bleu_against(
    outputs: &[Vec<usize>],
    refs: &[Vec<Vec<String>>],
    vocab: &Vocab,
) -> Result<f64> {
    let hyps: Vec<Vec<String>> = outputs
        .iter()
        .map(|o| o.iter().map(|&i| vocab.token(i).to_string()).collect())
        .collect();
    bleu_corpus(&hyps, refs)
}

/// BLEU against the source sentences themselves.
pub fn self_bleu(outputs: &[Vec<usize>], sources: &StyleCorpus, vocab: &Vocab) -> Result<f64> {
    let refs: Vec<Vec<Vec<String>>> = sources
        .sentences
        .iter()
        .map(|s| vec![s.tokens.clone()])
        .collect();
    bleu_against(outputs, &refs, vocab)
}

/// Accuracy under the evaluation classifier and BLEU against the references
/// (or the sources when no references exist).
pub fn evaluate(out: &Transferred, data: &Data, eval_cls: &TextCnn<f64>) -> Result<EvalReport> {
    let dirs = pair(|s| {
        let o = &out.outputs[s.index()];
        let bleu = if data.has_refs() {
            bleu_against(o, &data.refs[s.index()], &data.vocab)?
        } else {
            self_bleu(o, &data.test[s.index()], &data.vocab)?
        };
        Ok(DirectionScore {
            source: s,
            lines: o.len(),
            acc: transfer_accuracy(o, s.opposite(), eval_cls)?,
            bleu,
        })
    })?;
    Ok(EvalReport::new(dirs.to_vec()))
}
