//! Transfer metrics: multi-reference BLEU, classifier accuracy, G2/H2, and a
//! style-word frequency report.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::classifier::TextCnn;
use crate::corpus::{Style, StyleNames, Vocab};
use crate::error::{contract, Result};
use crate::lexicon::StyleLexicon;

fn ngram_counts<S: AsRef<str>>(toks: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w.iter().map(|s| s.as_ref()).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus-level BLEU-4 on a 0–100 scale with clipped counts over all
/// references of a line and the closest-reference brevity penalty (ties go to
/// the shorter reference). No smoothing.
pub fn bleu_corpus<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<Vec<S>>]) -> Result<f64> {
    if hyps.is_empty() || hyps.len() != refs.len() {
        return Err(contract!(
            "bleu needs one reference set per hypothesis, got {} and {}",
            hyps.len(),
            refs.len()
        ));
    }
    if refs.iter().any(|r| r.is_empty()) {
        return Err(contract!("every hypothesis needs at least one reference"));
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (h, rs) in hyps.iter().zip(refs) {
        hyp_len += h.len();
        ref_len += rs
            .iter()
            .map(|r| r.len())
            .min_by_key(|&l| ((l as i64 - h.len() as i64).abs(), l))
            .unwrap();
        for n in 1..=4 {
            let hc = ngram_counts(h, n);
            let mut max_ref: HashMap<Vec<&str>, usize> = HashMap::new();
            for r in rs {
                for (g, c) in ngram_counts(r, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(c);
                }
            }
            total[n - 1] += h.len().saturating_sub(n - 1);
            matched[n - 1] += hc
                .iter()
                .map(|(g, &c)| c.min(*max_ref.get(g).unwrap_or(&0)))
                .sum::<usize>();
        }
    }
    if matched.contains(&0) {
        return Ok(0.0);
    }
    let log_p = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if hyp_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    Ok(100.0 * bp * log_p.exp())
}

/// Sentence BLEU-4 with add-one smoothing for n > 1, for diagnostics.
pub fn sentence_bleu<S: AsRef<str>>(hyp: &[S], refs: &[Vec<S>]) -> f64 {
    if hyp.is_empty() || refs.is_empty() {
        return 0.0;
    }
    let mut log_p = 0.0;
    for n in 1..=4 {
        let hc = ngram_counts(hyp, n);
        let mut m = 0usize;
        for (g, &c) in &hc {
            let best = refs
                .iter()
                .map(|r| *ngram_counts(r, n).get(g).unwrap_or(&0))
                .max()
                .unwrap_or(0);
            m += c.min(best);
        }
        let t = hyp.len().saturating_sub(n - 1);
        let (num, den) = if n == 1 {
            (m as f64, t as f64)
        } else {
            (m as f64 + 1.0, t as f64 + 1.0)
        };
        if num == 0.0 {
            return 0.0;
        }
        log_p += (num / den).ln() / 4.0;
    }
    let r = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&l| ((l as i64 - hyp.len() as i64).abs(), l))
        .unwrap();
    let bp = if hyp.len() > r {
        1.0
    } else {
        (1.0 - r as f64 / hyp.len() as f64).exp()
    };
    100.0 * bp * log_p.exp()
}

/// Percentage of outputs the classifier assigns to `target`.
pub fn transfer_accuracy(outputs: &[Vec<usize>], target: Style, cls: &TextCnn<f64>) -> Result<f64> {
    if outputs.is_empty() {
        return Err(contract!("accuracy over no outputs"));
    }
    let mut hits = 0usize;
    for ids in outputs {
        // an empty output carries no style
        if !ids.is_empty() && cls.predict(ids)? == target {
            hits += 1;
        }
    }
    Ok(100.0 * hits as f64 / outputs.len() as f64)
}

/// Geometric and harmonic means of accuracy and BLEU.
pub fn g2_h2(acc: f64, bleu: f64) -> (f64, f64) {
    let g2 = (acc * bleu).max(0.0).sqrt();
    let h2 = if acc + bleu == 0.0 {
        0.0
    } else {
        2.0 * acc * bleu / (acc + bleu)
    };
    (g2, h2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionScore {
    /// Source style; outputs are in the opposite style.
    pub source: Style,
    pub lines: usize,
    pub acc: f64,
    pub bleu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub directions: Vec<DirectionScore>,
    pub acc: f64,
    pub bleu: f64,
    pub g2: f64,
    pub h2: f64,
}

impl EvalReport {
    /// Aggregates by averaging per-direction accuracy and BLEU.
    pub fn new(directions: Vec<DirectionScore>) -> Self {
        let k = directions.len().max(1) as f64;
        let acc = directions.iter().map(|d| d.acc).sum::<f64>() / k;
        let bleu = directions.iter().map(|d| d.bleu).sum::<f64>() / k;
        let (g2, h2) = g2_h2(acc, bleu);
        Self {
            directions,
            acc,
            bleu,
            g2,
            h2,
        }
    }

    pub fn render(&self, names: &StyleNames) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>8} {:>8} {:>8} {:>8}",
            "direction", "lines", "acc", "bleu", "g2", "h2"
        );
        let dir_name = |d: &DirectionScore| {
            format!(
                "{}-{}",
                names.name(d.source),
                names.name(d.source.opposite())
            )
        };
        for d in &self.directions {
            let (g2, h2) = g2_h2(d.acc, d.bleu);
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                dir_name(d),
                d.lines,
                d.acc,
                d.bleu,
                g2,
                h2
            );
        }
        let lines: usize = self.directions.iter().map(|d| d.lines).sum();
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
            "all", lines, self.acc, self.bleu, self.g2, self.h2
        );
        for d in &self.directions {
            let (g2, h2) = g2_h2(d.acc, d.bleu);
            let _ = writeln!(
                s,
                "RESULT dir={} acc={:.2} bleu={:.2} g2={:.2} h2={:.2}",
                dir_name(d),
                d.acc,
                d.bleu,
                g2,
                h2
            );
        }
        let _ = writeln!(
            s,
            "RESULT dir=all acc={:.2} bleu={:.2} g2={:.2} h2={:.2}",
            self.acc, self.bleu, self.g2, self.h2
        );
        s
    }
}

/// Style-word counts in transfer outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct StyleWordReport {
    pub tokens: usize,
    /// Words of the source style left in the output.
    pub residual: usize,
    /// Words of the target style present in the output.
    pub introduced: usize,
    /// Per word: `(word, count)`, most frequent first.
    pub by_word: Vec<(String, usize)>,
}

impl StyleWordReport {
    pub fn density(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            (self.residual + self.introduced) as f64 / self.tokens as f64
        }
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "tokens {} residual {} introduced {} density {:.4}\n",
            self.tokens,
            self.residual,
            self.introduced,
            self.density()
        );
        for (w, c) in &self.by_word {
            let _ = writeln!(s, "{w}\t{c}");
        }
        s
    }
}

pub fn style_word_report(
    outputs: &[Vec<usize>],
    source: Style,
    lexicon: &StyleLexicon,
    vocab: &Vocab,
) -> StyleWordReport {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    let mut report = StyleWordReport {
        tokens: 0,
        residual: 0,
        introduced: 0,
        by_word: Vec::new(),
    };
    for out in outputs {
        for &id in out {
            report.tokens += 1;
            match lexicon.style_of(id) {
                Some(s) if s == source => report.residual += 1,
                Some(_) => report.introduced += 1,
                None => continue,
            }
            *counts.entry(id).or_insert(0) += 1;
        }
    }
    let mut by: Vec<(String, usize)> = counts
        .into_iter()
        .map(|(id, c)| (vocab.token(id).to_string(), c))
        .collect();
    by.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    report.by_word = by;
    report
}
