//! Style-word lexicons from a bag-of-words logistic regression.
//!
//! Style X is the positive class. Each vocabulary word gets one coefficient;
//! coefficients are z-scored over the nonzero ones and passed through a
//! sigmoid, and a word joins X's set when `σ(z) ≥ threshold` (Y's set when
//! `σ(−z) ≥ threshold`).

use std::path::Path;

use crate::corpus::{Style, StyleCorpus, StyleNames, Vocab, NUM_RESERVED};
use crate::error::{contract, Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_L2: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct LrConfig {
    pub l2: f64,
    pub lr: f64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for LrConfig {
    fn default() -> Self {
        Self {
            l2: DEFAULT_L2,
            lr: 0.5,
            max_epochs: 2000,
            tol: 1e-8,
        }
    }
}

/// Fitted per-word coefficients (indexed by vocabulary id) and intercept.
#[derive(Clone, Debug)]
pub struct WordLr {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Objective after each epoch.
    pub losses: Vec<f64>,
}

fn sparse_counts(ids: &[usize]) -> Vec<(usize, f64)> {
    let mut v: Vec<(usize, f64)> = Vec::new();
    let mut sorted = ids.to_vec();
    sorted.sort_unstable();
    for id in sorted {
        match v.last_mut() {
            Some((last, c)) if *last == id => *c += 1.0,
            _ => v.push((id, 1.0)),
        }
    }
    v
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary logistic regression on token counts, full-batch gradient descent.
pub fn train_word_lr(
    x: &StyleCorpus,
    y: &StyleCorpus,
    vocab_size: usize,
    cfg: &LrConfig,
) -> Result<WordLr> {
    if x.is_empty() || y.is_empty() {
        return Err(contract!(
            "logistic regression needs sentences of both styles"
        ));
    }
    if x.style == y.style {
        return Err(contract!("logistic regression needs two distinct styles"));
    }
    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::with_capacity(x.len() + y.len());
    for (corpus, label) in [(x, 1.0), (y, 0.0)] {
        for s in &corpus.sentences {
            let feats = sparse_counts(&s.ids)
                .into_iter()
                .filter(|(id, _)| *id >= NUM_RESERVED && *id < vocab_size)
                .collect();
            rows.push((feats, label));
        }
    }
    let n = rows.len() as f64;
    let mut coef = vec![0.0; vocab_size];
    let mut intercept = 0.0;
    let objective = |coef: &[f64], intercept: f64| {
        let mut loss = 0.0;
        for (feats, label) in &rows {
            let z = intercept + feats.iter().map(|(i, c)| coef[*i] * c).sum::<f64>();
            // log(1 + e^{-z}) for y=1, log(1 + e^{z}) for y=0
            let s = if *label > 0.5 { -z } else { z };
            loss += if s > 0.0 {
                s + (-s).exp().ln_1p()
            } else {
                s.exp().ln_1p()
            };
        }
        loss / n + 0.5 * cfg.l2 * coef.iter().map(|w| w * w).sum::<f64>()
    };
    let mut losses = vec![objective(&coef, intercept)];
    let mut grad = vec![0.0; vocab_size];
    for _ in 0..cfg.max_epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut g0 = 0.0;
        for (feats, label) in &rows {
            let z = intercept + feats.iter().map(|(i, c)| coef[*i] * c).sum::<f64>();
            let r = (sigmoid(z) - label) / n;
            g0 += r;
            for (i, c) in feats {
                grad[*i] += r * c;
            }
        }
        for (w, g) in coef.iter_mut().zip(&grad) {
            // words never seen keep a zero coefficient
            if *g != 0.0 || *w != 0.0 {
                *w -= cfg.lr * (g + cfg.l2 * *w);
            }
        }
        intercept -= cfg.lr * g0;
        let loss = objective(&coef, intercept);
        let prev = *losses.last().unwrap();
        losses.push(loss);
        if !loss.is_finite() {
            return Err(Error::Numeric("logistic regression diverged".into()));
        }
        if (prev - loss).abs() < cfg.tol {
            break;
        }
    }
    Ok(WordLr {
        coef,
        intercept,
        losses,
    })
}

/// Per-style word sets with their sigmoid weights.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleLexicon {
    pub threshold: f64,
    /// `[X, Y]`: `(word id, weight)` sorted by descending weight.
    pub sides: [Vec<(usize, f64)>; 2],
}

/// Style words of one side, as surface forms and ids.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleWords {
    pub words: Vec<String>,
    pub ids: Vec<usize>,
}

impl StyleWords {
    pub fn new(pairs: Vec<(String, usize)>) -> Self {
        let (words, ids) = pairs.into_iter().unzip();
        Self { words, ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.ids.contains(&id)
    }
}

/// Thresholds standardised coefficients. An empty side is logged, not an error.
pub fn extract_lexicon(coef: &[f64], threshold: f64) -> StyleLexicon {
    let live: Vec<(usize, f64)> = coef
        .iter()
        .enumerate()
        .filter(|(i, c)| *i >= NUM_RESERVED && **c != 0.0)
        .map(|(i, c)| (i, *c))
        .collect();
    let mut sides: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
    if live.len() >= 2 {
        let k = live.len() as f64;
        let mean = live.iter().map(|p| p.1).sum::<f64>() / k;
        let std = (live.iter().map(|p| (p.1 - mean).powi(2)).sum::<f64>() / k).sqrt();
        if std > 0.0 {
            for (id, c) in live {
                let z = (c - mean) / std;
                if z > 0.0 && sigmoid(z) >= threshold {
                    sides[0].push((id, sigmoid(z)));
                } else if z < 0.0 && sigmoid(-z) >= threshold {
                    sides[1].push((id, sigmoid(-z)));
                }
            }
        }
    }
    for side in &mut sides {
        side.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    }
    for (s, side) in sides.iter().enumerate() {
        if side.is_empty() {
            log::warn!("style lexicon for side {s} is empty at threshold {threshold}");
        }
    }
    StyleLexicon { threshold, sides }
}

impl StyleLexicon {
    pub fn side(&self, style: Style) -> &[(usize, f64)] {
        &self.sides[style.index()]
    }

    pub fn words(&self, style: Style, vocab: &Vocab) -> StyleWords {
        StyleWords::new(
            self.side(style)
                .iter()
                .map(|&(id, _)| (vocab.token(id).to_string(), id))
                .collect(),
        )
    }

    pub fn style_of(&self, id: usize) -> Option<Style> {
        Style::BOTH
            .into_iter()
            .find(|&s| self.side(s).iter().any(|&(w, _)| w == id))
    }

    /// `word <TAB> style <TAB> weight`, descending weight.
    pub fn to_tsv(&self, vocab: &Vocab, names: &StyleNames) -> String {
        let mut rows: Vec<(&str, &str, f64)> = Vec::new();
        for s in Style::BOTH {
            for &(id, w) in self.side(s) {
                rows.push((vocab.token(id), names.name(s), w));
            }
        }
        rows.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(b.0)));
        rows.iter()
            .map(|(w, s, v)| format!("{w}\t{s}\t{v:.17}\n"))
            .collect()
    }

    pub fn from_tsv(text: &str, vocab: &Vocab, names: &StyleNames, threshold: f64) -> Result<Self> {
        let mut sides: [Vec<(usize, f64)>; 2] = [Vec::new(), Vec::new()];
        for (ln, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let bad = |m: &str| Error::Format {
                what: "lexicon",
                msg: format!("line {}: {m}", ln + 1),
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected three tab-separated columns"));
            }
            let id = vocab
                .get(cols[0])
                .filter(|&i| !Vocab::is_reserved(i))
                .ok_or_else(|| bad("word not in vocabulary"))?;
            let style = names.parse(cols[1])?;
            let w: f64 = cols[2].parse().map_err(|_| bad("weight is not a number"))?;
            sides[style.index()].push((id, w));
        }
        for side in &mut sides {
            side.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        }
        Ok(Self { threshold, sides })
    }

    pub fn save(&self, path: &Path, vocab: &Vocab, names: &StyleNames) -> Result<()> {
        std::fs::write(path, self.to_tsv(vocab, names)).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, vocab: &Vocab, names: &StyleNames, threshold: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, vocab, names, threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Split};
    use proptest::prelude::*;

    const NOUNS: [&str; 10] = [
        "food", "service", "staff", "pizza", "place", "soup", "bread", "menu", "bar", "patio",
    ];
    const NEGATIVE: [&str; 10] = [
        "awful", "rude", "bland", "cold", "dirty", "slow", "stale", "noisy", "pricey", "greasy",
    ];

    fn toy() -> (Vocab, StyleCorpus, StyleCorpus) {
        let pos: Vec<String> = NOUNS
            .iter()
            .map(|n| format!("the {n} was awesome"))
            .collect();
        let neg: Vec<String> = NOUNS
            .iter()
            .zip(NEGATIVE)
            .map(|(n, a)| format!("the {n} was {a}"))
            .collect();
        let mut x = StyleCorpus::from_lines(&pos, Style::X, Split::Train, None);
        let mut y = StyleCorpus::from_lines(&neg, Style::Y, Split::Train, None);
        let v = build_vocab(&[&x, &y], 1);
        x.encode(&v);
        y.encode(&v);
        (v, x, y)
    }

    #[test]
    fn exclusive_word_leans_to_its_style() {
        let (v, x, y) = toy();
        let fit = train_word_lr(&x, &y, v.len(), &LrConfig::default()).unwrap();
        assert!(fit.coef[v.id("awesome")] > 0.0);
        assert!(fit.coef[v.id("awful")] < 0.0);
    }

    #[test]
    fn shared_word_is_near_zero() {
        let pos: Vec<String> = NOUNS
            .iter()
            .map(|n| format!("the {n} was awesome"))
            .collect();
        let neg: Vec<String> = NOUNS.iter().map(|n| format!("the {n} was awful")).collect();
        let mut x = StyleCorpus::from_lines(&pos, Style::X, Split::Train, None);
        let mut y = StyleCorpus::from_lines(&neg, Style::Y, Split::Train, None);
        let v = build_vocab(&[&x, &y], 1);
        x.encode(&v);
        y.encode(&v);
        let fit = train_word_lr(&x, &y, v.len(), &LrConfig::default()).unwrap();
        for w in ["the", "food", "pizza", "was", "patio"] {
            assert!(fit.coef[v.id(w)].abs() < 0.05, "{w}: {}", fit.coef[v.id(w)]);
        }
        assert!(fit.coef[v.id("awesome")] > 1.0);
    }

    #[test]
    fn loss_is_monotone_under_small_steps() {
        let (v, x, y) = toy();
        let cfg = LrConfig {
            lr: 0.1,
            max_epochs: 300,
            ..LrConfig::default()
        };
        let fit = train_word_lr(&x, &y, v.len(), &cfg).unwrap();
        for w in fit.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn single_class_input_is_rejected() {
        let (v, x, _) = toy();
        assert!(train_word_lr(&x, &x, v.len(), &LrConfig::default()).is_err());
    }

    #[test]
    fn awesome_survives_the_high_threshold() {
        let (v, x, y) = toy();
        let fit = train_word_lr(&x, &y, v.len(), &LrConfig::default()).unwrap();
        let lex = extract_lexicon(&fit.coef, 0.9);
        assert!(lex
            .side(Style::X)
            .iter()
            .any(|&(id, _)| id == v.id("awesome")));
        assert!(lex.side(Style::X).iter().all(|&(_, w)| w >= 0.9));
    }

    #[test]
    fn midpoint_threshold_splits_every_word() {
        let (v, x, y) = toy();
        let fit = train_word_lr(&x, &y, v.len(), &LrConfig::default()).unwrap();
        let lex = extract_lexicon(&fit.coef, 0.5);
        let nonzero = fit
            .coef
            .iter()
            .skip(NUM_RESERVED)
            .filter(|c| **c != 0.0)
            .count();
        assert_eq!(lex.sides[0].len() + lex.sides[1].len(), nonzero);
    }

    #[test]
    fn tsv_round_trip() {
        let (v, x, y) = toy();
        let fit = train_word_lr(&x, &y, v.len(), &LrConfig::default()).unwrap();
        let lex = extract_lexicon(&fit.coef, 0.7);
        let names = StyleNames::new("pos", "neg");
        let tsv = lex.to_tsv(&v, &names);
        let weights: Vec<f64> = tsv
            .lines()
            .map(|l| l.split('\t').nth(2).unwrap().parse().unwrap())
            .collect();
        assert!(weights.windows(2).all(|w| w[0] >= w[1]));
        let back = StyleLexicon::from_tsv(&tsv, &v, &names, 0.7).unwrap();
        assert_eq!(back, lex);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_words(coef in proptest::collection::vec(-3.0f64..3.0, 6..40),
                                              lo in 0.5f64..0.99, gap in 0.0f64..0.5) {
            let hi = (lo + gap).min(0.999);
            let a = extract_lexicon(&coef, lo);
            let b = extract_lexicon(&coef, hi);
            for s in 0..2 {
                for (id, _) in &b.sides[s] {
                    prop_assert!(a.sides[s].iter().any(|(j, _)| j == id));
                }
            }
            let xs: Vec<usize> = a.sides[0].iter().map(|p| p.0).collect();
            prop_assert!(a.sides[1].iter().all(|(id, _)| !xs.contains(id)));
        }
    }
}
