//! Candidate sets and pseudo-parallel pair selection.
//!
//! Each training sentence keeps only its best back-translation so far. The
//! scorer (WMD embeddings and classifier) is frozen for the whole run, so the
//! streaming maximum equals the argmax over the full candidate history.

use std::fmt::Write as _;
use std::path::Path;

use crate::classifier::TextCnn;
use crate::corpus::{Style, TokenSeq};
use crate::error::{Error, Result};
use crate::wmd::{con_score, WordEmbeddings};

/// Frozen CS scorer. Without a classifier the score is content only.
pub struct Scorer<'a> {
    pub embeddings: &'a WordEmbeddings<f64>,
    pub classifier: Option<&'a TextCnn<f64>>,
}

impl Scorer<'_> {
    /// `Con + Sty`, or `−∞` when the candidate has no scorable words.
    pub fn cs_score(&self, candidate: &[usize], original: &[usize], target: Style) -> Result<f64> {
        let con = match con_score(candidate, original, self.embeddings) {
            Ok(c) => c,
            Err(Error::Contract(_)) => return Ok(f64::NEG_INFINITY),
            Err(e) => return Err(e),
        };
        let sty = match self.classifier {
            Some(c) if !candidate.is_empty() => c.sty_score(candidate, target)?,
            Some(_) => return Ok(f64::NEG_INFINITY),
            None => 0.0,
        };
        Ok(con + sty)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub source_id: usize,
    pub source_style: Style,
    pub best: Option<TokenSeq>,
    pub best_cs: f64,
    pub best_epoch: usize,
    pub seen: usize,
    /// Whether the latest offer replaced the best.
    pub updated: bool,
}

impl CandidateSet {
    pub fn new(source_id: usize, source_style: Style) -> Self {
        Self {
            source_id,
            source_style,
            best: None,
            best_cs: f64::NEG_INFINITY,
            best_epoch: 0,
            seen: 0,
            updated: false,
        }
    }

    /// Keeps the candidate iff its score strictly beats the best, or always
    /// when `keep_newest` is set (refinement disabled).
    pub fn offer(&mut self, candidate: TokenSeq, cs: f64, epoch: usize, keep_newest: bool) {
        self.seen += 1;
        self.updated =
            keep_newest || self.best.is_none() && cs > f64::NEG_INFINITY || cs > self.best_cs;
        if self.updated {
            self.best = Some(candidate);
            self.best_cs = cs;
            self.best_epoch = epoch;
        }
    }
}

/// A refined generated source and the original sentence it was made from.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoPair {
    pub source: TokenSeq,
    pub target: TokenSeq,
    pub cs: f64,
}

/// One pair per set whose best is scorable. `originals[style][id]` are the
/// corpus sentences the sets were generated from.
pub fn emit_pairs(sets: &[CandidateSet], originals: [&[TokenSeq]; 2]) -> Vec<PseudoPair> {
    let mut pairs = Vec::with_capacity(sets.len());
    let mut skipped = 0usize;
    for set in sets {
        match &set.best {
            Some(best) if set.best_cs > f64::NEG_INFINITY => {
                let target = originals[set.source_style.index()][set.source_id].clone();
                debug_assert_ne!(best.style, target.style);
                pairs.push(PseudoPair {
                    source: best.clone(),
                    target,
                    cs: set.best_cs,
                });
            }
            _ => skipped += 1,
        }
    }
    if skipped > 0 {
        log::warn!("{skipped} sentences have no scorable candidate this epoch");
    }
    pairs
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinementStats {
    pub epoch: usize,
    pub mean_cs: f64,
    pub mean_sty: f64,
    pub mean_con: f64,
    pub update_fraction: f64,
}

/// Means over sets with a scorable best.
pub fn refinement_stats(
    sets: &[CandidateSet],
    epoch: usize,
    scorer: &Scorer<'_>,
    originals: [&[TokenSeq]; 2],
) -> Result<RefinementStats> {
    let (mut cs, mut sty, mut con, mut n) = (0.0, 0.0, 0.0, 0usize);
    for set in sets {
        if let Some(best) = set.best.as_ref().filter(|_| set.best_cs.is_finite()) {
            let orig = &originals[set.source_style.index()][set.source_id];
            let c = con_score(&best.ids, &orig.ids, scorer.embeddings)?;
            let s = match scorer.classifier {
                Some(cls) => cls.sty_score(&best.ids, set.source_style.opposite())?,
                None => 0.0,
            };
            cs += set.best_cs;
            con += c;
            sty += s;
            n += 1;
        }
    }
    let k = n.max(1) as f64;
    Ok(RefinementStats {
        epoch,
        mean_cs: cs / k,
        mean_sty: sty / k,
        mean_con: con / k,
        update_fraction: sets.iter().filter(|s| s.updated).count() as f64
            / sets.len().max(1) as f64,
    })
}

/// `source_id <TAB> cs <TAB> candidate tokens` per set.
pub fn dump(sets: &[CandidateSet], path: &Path) -> Result<()> {
    let mut s = String::new();
    for set in sets {
        if let Some(best) = &set.best {
            let _ = writeln!(s, "{}\t{:.6}\t{}", set.source_id, set.best_cs, best.text());
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn seq(ids: &[usize], style: Style) -> TokenSeq {
        TokenSeq {
            tokens: ids.iter().map(|i| format!("w{i}")).collect(),
            ids: ids.to_vec(),
            style,
        }
    }

    #[test]
    fn first_offer_wins_and_dominated_offers_lose() {
        let mut s = CandidateSet::new(0, Style::X);
        s.offer(seq(&[4], Style::Y), -0.5, 1, false);
        assert!(s.updated && s.best_cs == -0.5);
        s.offer(seq(&[5], Style::Y), -0.7, 2, false);
        assert!(!s.updated && s.best.as_ref().unwrap().ids == vec![4]);
        s.offer(seq(&[6], Style::Y), -0.5, 3, false);
        assert_eq!(s.best_epoch, 1, "ties keep the earlier candidate");
        s.offer(seq(&[7], Style::Y), -0.9, 4, true);
        assert_eq!(s.best.as_ref().unwrap().ids, vec![7]);
        assert_eq!(s.seen, 4);
    }

    #[test]
    fn identical_candidate_with_certain_classifier_scores_one() {
        let raw = Tensor::from_vec(
            &[6, 2],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let emb = WordEmbeddings::normalized(&raw);
        let scorer = Scorer {
            embeddings: &emb,
            classifier: None,
        };
        assert_eq!(scorer.cs_score(&[4, 5], &[5, 4], Style::Y).unwrap(), 0.0);
        assert_eq!(
            scorer.cs_score(&[1, 1], &[4], Style::Y).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn emitted_pairs_have_opposite_styles_and_original_targets() {
        let xs = vec![seq(&[4, 5], Style::X)];
        let ys = vec![seq(&[6, 7], Style::Y)];
        let mut a = CandidateSet::new(0, Style::X);
        a.offer(seq(&[6, 5], Style::Y), -0.1, 1, false);
        let mut b = CandidateSet::new(0, Style::Y);
        b.offer(seq(&[1], Style::X), f64::NEG_INFINITY, 1, false);
        let pairs = emit_pairs(&[a, b], [&xs, &ys]);
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].target, xs[0]);
        assert_ne!(pairs[0].source.style, pairs[0].target.style);
    }
}
