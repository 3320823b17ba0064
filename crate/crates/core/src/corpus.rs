//! Corpus ingestion: tokenisation, vocabularies, batching and dataset counts.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const NUM_RESERVED: usize = 4;
pub const RESERVED: [&str; NUM_RESERVED] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Sentences longer than this are truncated at load.
pub const MAX_LEN: usize = 64;
pub const DEFAULT_MIN_COUNT: usize = 2;

/// One of the two styles of a transfer task.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Style {
    X,
    Y,
}

impl Style {
    pub const BOTH: [Style; 2] = [Style::X, Style::Y];

    pub fn index(self) -> usize {
        match self {
            Style::X => 0,
            Style::Y => 1,
        }
    }

    pub fn from_index(i: usize) -> Style {
        if i == 0 {
            Style::X
        } else {
            Style::Y
        }
    }

    pub fn opposite(self) -> Style {
        match self {
            Style::X => Style::Y,
            Style::Y => Style::X,
        }
    }
}

/// Surface names of the two styles, e.g. `pos`/`neg`; they are also the file suffixes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StyleNames {
    pub x: String,
    pub y: String,
}

impl StyleNames {
    pub fn new(x: impl Into<String>, y: impl Into<String>) -> Self {
        Self {
            x: x.into(),
            y: y.into(),
        }
    }

    pub fn name(&self, s: Style) -> &str {
        match s {
            Style::X => &self.x,
            Style::Y => &self.y,
        }
    }

    pub fn parse(&self, name: &str) -> Result<Style> {
        if name == self.x {
            Ok(Style::X)
        } else if name == self.y {
            Ok(Style::Y)
        } else {
            Err(Error::Config(format!(
                "unknown style {name:?}, expected {:?} or {:?}",
                self.x, self.y
            )))
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from ranked tokens (reserved entries are prepended).
    pub fn from_ranked(words: impl IntoIterator<Item = String>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        for w in words {
            if !index.contains_key(&w) {
                index.insert(w.clone(), tokens.len());
                tokens.push(w);
            }
        }
        Self { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Vocabulary id of `word`, UNK when absent.
    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens
            .get(id)
            .map(String::as_str)
            .unwrap_or(RESERVED[UNK])
    }

    pub fn is_reserved(id: usize) -> bool {
        id < NUM_RESERVED
    }

    /// Non-reserved tokens in id order.
    pub fn words(&self) -> &[String] {
        &self.tokens[NUM_RESERVED..]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        for w in self.words() {
            s.push_str(w);
            s.push('\n');
        }
        std::fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_ranked(
            text.lines().filter(|l| !l.is_empty()).map(str::to_string),
        ))
    }
}

/// A tokenised sentence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
    pub ids: Vec<usize>,
    pub style: Style,
}

/// Lowercases and splits on whitespace.
pub fn tokenize(line: &str) -> Vec<String> {
    line.split_whitespace().map(|t| t.to_lowercase()).collect()
}

pub fn detokenize<S: AsRef<str>>(tokens: &[S]) -> String {
    tokens
        .iter()
        .map(|t| t.as_ref())
        .collect::<Vec<_>>()
        .join(" ")
}

impl TokenSeq {
    /// Tokenises one line; `None` for blank lines. Without a vocabulary every id is UNK.
    pub fn from_line(line: &str, style: Style, vocab: Option<&Vocab>) -> Option<Self> {
        let mut tokens = tokenize(line);
        if tokens.is_empty() {
            return None;
        }
        tokens.truncate(MAX_LEN);
        Some(Self::from_tokens(tokens, style, vocab))
    }

    pub fn from_tokens(tokens: Vec<String>, style: Style, vocab: Option<&Vocab>) -> Self {
        let ids = match vocab {
            Some(v) => tokens.iter().map(|t| v.id(t)).collect(),
            None => vec![UNK; tokens.len()],
        };
        Self { tokens, ids, style }
    }

    /// Rebuilds surface forms from ids (model output).
    pub fn from_ids(ids: Vec<usize>, style: Style, vocab: &Vocab) -> Self {
        let tokens = ids.iter().map(|&i| vocab.token(i).to_string()).collect();
        Self { tokens, ids, style }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }

    pub fn with_style(mut self, style: Style) -> Self {
        self.style = style;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StyleCorpus {
    pub style: Style,
    pub split: Split,
    pub sentences: Vec<TokenSeq>,
}

impl StyleCorpus {
    pub fn new(style: Style, split: Split, sentences: Vec<TokenSeq>) -> Result<Self> {
        if sentences.iter().any(|s| s.style != style) {
            return Err(contract!(
                "corpus of style {style:?} holds a sentence of another style"
            ));
        }
        Ok(Self {
            style,
            split,
            sentences,
        })
    }

    pub fn from_lines<S: AsRef<str>>(
        lines: &[S],
        style: Style,
        split: Split,
        vocab: Option<&Vocab>,
    ) -> Self {
        let sentences = lines
            .iter()
            .filter_map(|l| TokenSeq::from_line(l.as_ref(), style, vocab))
            .collect();
        Self {
            style,
            split,
            sentences,
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    /// Re-maps every token through `vocab`.
    pub fn encode(&mut self, vocab: &Vocab) {
        for s in &mut self.sentences {
            s.ids = s.tokens.iter().map(|t| vocab.id(t)).collect();
        }
    }
}

/// Reads one sentence per line. Blank lines are skipped; a file with no
/// sentences is a contract violation.
pub fn load_corpus(
    path: &Path,
    style: Style,
    split: Split,
    vocab: Option<&Vocab>,
) -> Result<StyleCorpus> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<&str> = text.lines().collect();
    let corpus = StyleCorpus::from_lines(&lines, style, split, vocab);
    if corpus.is_empty() {
        return Err(contract!("corpus file {} is empty", path.display()));
    }
    Ok(corpus)
}

/// `<dir>/<split>.<style>`
pub fn corpus_path(dir: &Path, split: Split, style_name: &str) -> std::path::PathBuf {
    dir.join(format!("{}.{}", split.as_str(), style_name))
}

/// Tokens with frequency ≥ `min_count`, most frequent first, ties broken lexicographically.
pub fn build_vocab(corpora: &[&StyleCorpus], min_count: usize) -> Vocab {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in corpora {
        for s in &c.sentences {
            for t in &s.tokens {
                *counts.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(w, n)| *n >= min_count.max(1) && !RESERVED.contains(w))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Vocab::from_ranked(ranked.into_iter().map(|(w, _)| w.to_string()))
}

/// A padded single-style batch. `ids` and `mask` are `size × max_len`, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub style: Style,
    /// Positions of the member sentences in their corpus.
    pub indices: Vec<usize>,
    pub lengths: Vec<usize>,
    pub max_len: usize,
    pub ids: Vec<usize>,
    pub mask: Vec<bool>,
}

impl Batch {
    pub fn from_seqs(seqs: &[&[usize]], indices: Vec<usize>, style: Style) -> Self {
        let max_len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
        let mut ids = Vec::with_capacity(seqs.len() * max_len);
        let mut mask = Vec::with_capacity(seqs.len() * max_len);
        for s in seqs {
            ids.extend_from_slice(s);
            mask.extend(std::iter::repeat_n(true, s.len()));
            ids.extend(std::iter::repeat_n(PAD, max_len - s.len()));
            mask.extend(std::iter::repeat_n(false, max_len - s.len()));
        }
        Self {
            style,
            indices,
            lengths: seqs.iter().map(|s| s.len()).collect(),
            max_len,
            ids,
            mask,
        }
    }

    pub fn size(&self) -> usize {
        self.lengths.len()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.ids[i * self.max_len..i * self.max_len + self.lengths[i]]
    }
}

/// Shuffles with `seed`, buckets by length, pads. No batch mixes styles.
pub fn make_batches(corpus: &StyleCorpus, batch_size: usize, seed: u64) -> Vec<Batch> {
    let seqs: Vec<&[usize]> = corpus.sentences.iter().map(|s| s.ids.as_slice()).collect();
    batch_indices(&seqs, corpus.style, batch_size, seed)
}

pub(crate) fn batch_indices(
    seqs: &[&[usize]],
    style: Style,
    batch_size: usize,
    seed: u64,
) -> Vec<Batch> {
    let batch_size = batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    order.shuffle(&mut rng);
    let mut batches = Vec::new();
    for pool in order.chunks(batch_size * 50) {
        let mut pool = pool.to_vec();
        pool.sort_by_key(|&i| seqs[i].len());
        for chunk in pool.chunks(batch_size) {
            let members: Vec<&[usize]> = chunk.iter().map(|&i| seqs[i]).collect();
            batches.push(Batch::from_seqs(&members, chunk.to_vec(), style));
        }
    }
    batches.shuffle(&mut rng);
    batches
}

/// Sentence counts per split and style, in the layout of the usual dataset table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub names: StyleNames,
    /// `[split][style]`; `None` when the file is absent.
    pub counts: [[Option<usize>; 2]; 3],
}

impl CorpusStats {
    pub fn collect(dir: &Path, names: &StyleNames) -> Result<Self> {
        let mut counts = [[None; 2]; 3];
        for (si, split) in Split::ALL.iter().enumerate() {
            for style in Style::BOTH {
                let p = corpus_path(dir, *split, names.name(style));
                if p.exists() {
                    let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                    counts[si][style.index()] =
                        Some(text.lines().filter(|l| !l.trim().is_empty()).count());
                }
            }
        }
        Ok(Self {
            names: names.clone(),
            counts,
        })
    }

    pub fn render(&self) -> String {
        let mut s = format!("{:<6} {:>10} {:>10}\n", "", self.names.x, self.names.y);
        for (si, split) in Split::ALL.iter().enumerate() {
            let cell = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<6} {:>10} {:>10}\n",
                split.as_str(),
                cell(self.counts[si][0]),
                cell(self.counts[si][1])
            ));
        }
        s
    }
}
