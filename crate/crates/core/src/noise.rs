//! Corruption processes: drop/shuffle noise for denoising reconstruction and
//! style-word pollution (replace or insert).

use rand::Rng;

use crate::corpus::TokenSeq;
use crate::error::{contract, Error, Result};
use crate::lexicon::StyleWords;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum PolluteMode {
    Replace,
    Insert,
}

impl std::str::FromStr for PolluteMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replace" => Ok(PolluteMode::Replace),
            "insert" => Ok(PolluteMode::Insert),
            other => Err(Error::Config(format!(
                "pollute mode must be replace or insert, got {other:?}"
            ))),
        }
    }
}

impl PolluteMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PolluteMode::Replace => "replace",
            PolluteMode::Insert => "insert",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec {
    pub drop_prob: f64,
    pub shuffle_window: usize,
    pub p_sn: f64,
    pub pollute_mode: PolluteMode,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            drop_prob: 0.1,
            shuffle_window: 3,
            p_sn: 0.2,
            pollute_mode: PolluteMode::Replace,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.drop_prob) {
            return Err(Error::Config(format!(
                "noise.drop_prob {} not in [0,1)",
                self.drop_prob
            )));
        }
        if !(0.0..=1.0).contains(&self.p_sn) {
            return Err(Error::Config(format!(
                "noise.p_sn {} not in [0,1]",
                self.p_sn
            )));
        }
        if self.shuffle_window > crate::corpus::MAX_LEN {
            return Err(Error::Config(
                "noise.shuffle_window exceeds the maximum sentence length".into(),
            ));
        }
        Ok(())
    }
}

/// Word dropout followed by a local shuffle in which no token moves more than
/// `shuffle_window` positions. At least one token always survives.
pub fn dae_corrupt<R: Rng>(s: &TokenSeq, spec: &NoiseSpec, rng: &mut R) -> TokenSeq {
    let n = s.len();
    let mut keep: Vec<usize> = (0..n).filter(|_| !rng.gen_bool(spec.drop_prob)).collect();
    if keep.is_empty() && n > 0 {
        keep.push(rng.gen_range(0..n));
    }
    if spec.shuffle_window > 0 && keep.len() > 1 {
        let alpha = (spec.shuffle_window + 1) as f64;
        let mut keyed: Vec<(f64, usize)> = keep
            .iter()
            .enumerate()
            .map(|(pos, &src)| (pos as f64 + rng.gen_range(0.0..alpha), src))
            .collect();
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
        keep = keyed.into_iter().map(|(_, src)| src).collect();
    }
    TokenSeq {
        tokens: keep.iter().map(|&i| s.tokens[i].clone()).collect(),
        ids: keep.iter().map(|&i| s.ids[i]).collect(),
        style: s.style,
    }
}

/// Substitutes (or inserts after) each position with probability `p` a word
/// drawn uniformly from `words`.
pub fn pollute<R: Rng>(
    s: &TokenSeq,
    words: &StyleWords,
    p: f64,
    mode: PolluteMode,
    rng: &mut R,
) -> Result<TokenSeq> {
    if words.is_empty() {
        return Err(contract!("pollution needs a nonempty style word set"));
    }
    if s.is_empty() {
        return Err(contract!("cannot pollute an empty sentence"));
    }
    let mut out = TokenSeq {
        tokens: Vec::with_capacity(s.len()),
        ids: Vec::with_capacity(s.len()),
        style: s.style,
    };
    for (tok, &id) in s.tokens.iter().zip(&s.ids) {
        let hit = rng.gen_bool(p);
        let draw = |rng: &mut R| rng.gen_range(0..words.len());
        match mode {
            PolluteMode::Replace => {
                if hit {
                    let k = draw(rng);
                    out.tokens.push(words.words[k].clone());
                    out.ids.push(words.ids[k]);
                } else {
                    out.tokens.push(tok.clone());
                    out.ids.push(id);
                }
            }
            PolluteMode::Insert => {
                out.tokens.push(tok.clone());
                out.ids.push(id);
                if hit {
                    let k = draw(rng);
                    out.tokens.push(words.words[k].clone());
                    out.ids.push(words.ids[k]);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Style;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(n: usize) -> TokenSeq {
        TokenSeq {
            tokens: (0..n).map(|i| format!("w{i}")).collect(),
            ids: (0..n).map(|i| 100 + i).collect(),
            style: Style::X,
        }
    }

    fn words() -> StyleWords {
        StyleWords::new(vec![("great".into(), 7), ("tasty".into(), 8)])
    }

    #[test]
    fn zero_noise_is_identity() {
        let s = seq(9);
        let spec = NoiseSpec {
            drop_prob: 0.0,
            shuffle_window: 0,
            ..NoiseSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(dae_corrupt(&s, &spec, &mut rng), s);
    }

    #[test]
    fn drop_only_gives_a_subsequence() {
        let s = seq(30);
        let spec = NoiseSpec {
            drop_prob: 0.5,
            shuffle_window: 0,
            ..NoiseSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = dae_corrupt(&s, &spec, &mut rng);
        assert!(out.ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn never_empty() {
        let s = seq(1);
        let spec = NoiseSpec {
            drop_prob: 0.99,
            ..NoiseSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            assert_eq!(dae_corrupt(&s, &spec, &mut rng).len(), 1);
        }
    }

    #[test]
    fn drop_rate_matches_setting() {
        let s = seq(1000);
        let spec = NoiseSpec {
            drop_prob: 0.1,
            shuffle_window: 0,
            ..NoiseSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let kept: usize = (0..100)
            .map(|_| dae_corrupt(&s, &spec, &mut rng).len())
            .sum();
        let rate = 1.0 - kept as f64 / 100_000.0;
        assert!((0.09..=0.11).contains(&rate), "{rate}");
    }

    #[test]
    fn pollute_endpoints() {
        let s = seq(12);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(
            pollute(&s, &words(), 0.0, PolluteMode::Replace, &mut rng).unwrap(),
            s
        );
        let one = StyleWords::new(vec![("great".into(), 7)]);
        let all = pollute(&s, &one, 1.0, PolluteMode::Replace, &mut rng).unwrap();
        assert!(all.ids.iter().all(|&i| i == 7));
        assert!(all.tokens.iter().all(|t| t == "great"));
    }

    #[test]
    fn replace_rate_matches_setting() {
        let s = seq(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut replaced = 0;
        for _ in 0..100 {
            let out = pollute(&s, &words(), 0.2, PolluteMode::Replace, &mut rng).unwrap();
            replaced += out.ids.iter().filter(|&&i| i < 100).count();
        }
        let rate = replaced as f64 / 100_000.0;
        assert!((0.19..=0.21).contains(&rate), "{rate}");
    }

    #[test]
    fn empty_word_set_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let err = pollute(
            &seq(3),
            &StyleWords::new(vec![]),
            0.2,
            PolluteMode::Replace,
            &mut rng,
        );
        assert!(matches!(err, Err(Error::Contract(_))));
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::default().validate().is_ok());
        assert!(NoiseSpec {
            drop_prob: 1.0,
            ..NoiseSpec::default()
        }
        .validate()
        .is_err());
        assert!(NoiseSpec {
            p_sn: 1.5,
            ..NoiseSpec::default()
        }
        .validate()
        .is_err());
        assert_eq!(
            "insert".parse::<PolluteMode>().unwrap(),
            PolluteMode::Insert
        );
        assert!("mask".parse::<PolluteMode>().is_err());
    }

    proptest! {
        #[test]
        fn shuffle_moves_tokens_at_most_window(n in 1usize..40, window in 0usize..6, seed in any::<u64>()) {
            let s = seq(n);
            let spec = NoiseSpec { drop_prob: 0.0, shuffle_window: window, ..NoiseSpec::default() };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = dae_corrupt(&s, &spec, &mut rng);
            prop_assert_eq!(out.len(), n);
            for (pos, &id) in out.ids.iter().enumerate() {
                let orig = id - 100;
                prop_assert!((pos as i64 - orig as i64).unsigned_abs() as usize <= window);
            }
        }

        #[test]
        fn pollution_invariants(n in 1usize..30, p in 0.0f64..=1.0, seed in any::<u64>(), insert in any::<bool>()) {
            let s = seq(n);
            let mode = if insert { PolluteMode::Insert } else { PolluteMode::Replace };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = pollute(&s, &words(), p, mode, &mut rng).unwrap();
            match mode {
                PolluteMode::Replace => prop_assert_eq!(out.len(), n),
                PolluteMode::Insert => prop_assert!(out.len() >= n),
            }
            for &id in &out.ids {
                prop_assert!(id >= 100 || words().contains(id));
            }
            let mut again = ChaCha8Rng::seed_from_u64(seed);
            prop_assert_eq!(pollute(&s, &words(), p, mode, &mut again).unwrap(), out);
        }
    }
}
