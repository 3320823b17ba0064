//! Run configuration: `key = value` file, then `SEDAE_*` environment
//! variables, then command-line flags, later sources winning.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use sedae::classifier::{ClassifierTraining, CnnConfig};
use sedae::corpus::{StyleNames, DEFAULT_MIN_COUNT};
use sedae::lexicon::{LrConfig, DEFAULT_THRESHOLD};
use sedae::noise::{NoiseSpec, PolluteMode};
use sedae::train::TrainConfig;

pub const ENV_PREFIX: &str = "SEDAE_";

/// Every accepted key with its default and a one-line description.
pub fn keys() -> Vec<(&'static str, String, &'static str)> {
    let t = TrainConfig::default();
    let n = NoiseSpec::default();
    let c = CnnConfig::default();
    let h = ClassifierTraining::default();
    let l = LrConfig::default();
    let widths = c
        .widths
        .iter()
        .map(|w| w.to_string())
        .collect::<Vec<_>>()
        .join(",");
    vec![
        ("data_dir", ".".into(), "directory holding {train,dev,test}.<style> files"),
        ("out_dir", "run".into(), "directory for every artifact of the run"),
        ("style_x", "pos".into(), "file suffix of the first style"),
        ("style_y", "neg".into(), "file suffix of the second style"),
        ("min_count", DEFAULT_MIN_COUNT.to_string(), "minimum training count for a vocabulary word"),
        ("seed", "0".into(), "global seed"),
        ("threads", "1".into(), "worker threads for batched decoding"),
        ("cnn_emb_dim", c.emb_dim.to_string(), "classifier embedding size"),
        ("cnn_widths", widths, "classifier filter widths, comma separated"),
        ("cnn_filters", c.filters.to_string(), "classifier filters per width"),
        ("cnn_dropout", c.dropout.to_string(), "classifier dropout on pooled features"),
        ("cls_epochs", h.epochs.to_string(), "classifier training epochs"),
        ("cls_batch_size", h.batch_size.to_string(), "classifier batch size"),
        ("cls_lr", h.lr.to_string(), "classifier learning rate"),
        ("lexicon_threshold", DEFAULT_THRESHOLD.to_string(), "lexicon cutoff on the squashed standardized weight"),
        ("lexicon_l2", l.l2.to_string(), "L2 strength of the word-level regression"),
        ("lexicon_lr", l.lr.to_string(), "gradient step of the word-level regression"),
        ("lexicon_max_epochs", l.max_epochs.to_string(), "iteration cap of the word-level regression"),
        ("emb_dim", t.emb_dim.to_string(), "word embedding size"),
        ("enc_hidden", t.enc_hidden.to_string(), "encoder hidden size per direction"),
        ("dec_hidden", t.dec_hidden.to_string(), "decoder hidden size"),
        ("layers", t.layers.to_string(), "encoder and decoder depth"),
        ("batch_size", t.batch_size.to_string(), "transfer model batch size"),
        ("lr", t.lr.to_string(), "transfer model learning rate"),
        ("clip", t.clip.to_string(), "gradient norm clip"),
        ("lambda", t.lambda.to_string(), "weight of the reconstruction loss against the style loss"),
        ("warmup_epochs", t.warmup_epochs.to_string(), "denoising style-modeling epochs"),
        ("bt_epochs", t.bt_epochs.to_string(), "back-translation epochs"),
        ("patience", t.patience.to_string(), "epochs without dev G2 gain before stopping"),
        ("use_classifier", t.use_classifier.to_string(), "style loss and classifier term of the refinement score"),
        ("use_refinement", t.use_refinement.to_string(), "keep the best candidate instead of the newest"),
        ("use_style_noise", t.use_style_noise.to_string(), "pollute refined sources with style words"),
        ("bt_dae_noise", t.bt_dae_noise.to_string(), "also drop/shuffle refined sources"),
        ("bt_style_modeling", t.bt_style_modeling.to_string(), "add the warmup loss to each back-translation step"),
        ("drop_prob", n.drop_prob.to_string(), "word drop probability of the denoising noise"),
        ("shuffle_window", n.shuffle_window.to_string(), "local shuffle window of the denoising noise"),
        ("p_sn", n.p_sn.to_string(), "style noise probability per word"),
        ("pollute_mode", n.pollute_mode.as_str().into(), "style noise mode: replace or insert"),
        ("dump_refined", "false".into(), "write refined.<epoch>.tsv after each epoch"),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn parse_file(text: &str, origin: &Path) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            anyhow!("{}:{}: expected `key = value`", origin.display(), i + 1)
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn defaults() -> Self {
        Self {
            values: keys()
                .into_iter()
                .map(|(k, v, _)| (k.to_string(), v))
                .collect(),
        }
    }

    /// Merges the file, the environment and the overrides, in that order.
    pub fn resolve(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut cfg = Self::defaults();
        if let Some(p) = file {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            for (k, v) in parse_file(&text, p)? {
                cfg.set(&k, &v)
                    .with_context(|| format!("in {}", p.display()))?;
            }
        }
        let mut env: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(ENV_PREFIX)
                    .map(|s| (s.to_ascii_lowercase(), v))
            })
            .collect();
        env.sort();
        for (k, v) in env {
            cfg.set(&k, &v)
                .with_context(|| format!("in environment variable {ENV_PREFIX}{}", k.to_ascii_uppercase()))?;
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => bail!("unknown configuration key {key:?}"),
        }
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("configuration key {key} is not declared"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .parse()
            .map_err(|e| anyhow!("configuration key {key} = {:?}: {e}", self.get(key)))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => bail!("configuration key {key} = {v:?} is not a boolean"),
        }
    }

    /// Parses every typed view once so bad values fail before any work starts.
    fn check(&self) -> Result<()> {
        self.train()?.validate()?;
        self.cnn()?;
        self.cls_training()?;
        self.lr_config()?;
        self.lexicon_threshold()?;
        self.min_count()?;
        self.threads()?;
        self.flag("dump_refined")?;
        if self.get("style_x") == self.get("style_y") {
            bail!("style_x and style_y must differ");
        }
        Ok(())
    }

    pub fn seed(&self) -> Result<u64> {
        self.parse("seed")
    }

    pub fn threads(&self) -> Result<usize> {
        let n: usize = self.parse("threads")?;
        if n == 0 {
            bail!("threads must be at least 1");
        }
        Ok(n)
    }

    pub fn min_count(&self) -> Result<usize> {
        self.parse("min_count")
    }

    pub fn data_dir(&self) -> PathBuf {
        PathBuf::from(self.get("data_dir"))
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(self.get("out_dir"))
    }

    pub fn names(&self) -> StyleNames {
        StyleNames::new(self.get("style_x"), self.get("style_y"))
    }

    pub fn dump_refined(&self) -> bool {
        self.flag("dump_refined").unwrap_or(false)
    }

    pub fn lexicon_threshold(&self) -> Result<f64> {
        let t: f64 = self.parse("lexicon_threshold")?;
        if !(0.5..1.0).contains(&t) {
            bail!("lexicon_threshold must lie in [0.5, 1)");
        }
        Ok(t)
    }

    pub fn cnn(&self) -> Result<CnnConfig> {
        let widths = self
            .get("cnn_widths")
            .split(',')
            .map(|w| {
                w.trim()
                    .parse()
                    .map_err(|e| anyhow!("cnn_widths entry {w:?}: {e}"))
            })
            .collect::<Result<Vec<usize>>>()?;
        Ok(CnnConfig {
            emb_dim: self.parse("cnn_emb_dim")?,
            widths,
            filters: self.parse("cnn_filters")?,
            dropout: self.parse("cnn_dropout")?,
        })
    }

    pub fn cls_training(&self) -> Result<ClassifierTraining> {
        Ok(ClassifierTraining {
            epochs: self.parse("cls_epochs")?,
            batch_size: self.parse("cls_batch_size")?,
            lr: self.parse("cls_lr")?,
            ..ClassifierTraining::default()
        })
    }

    pub fn lr_config(&self) -> Result<LrConfig> {
        Ok(LrConfig {
            l2: self.parse("lexicon_l2")?,
            lr: self.parse("lexicon_lr")?,
            max_epochs: self.parse("lexicon_max_epochs")?,
            ..LrConfig::default()
        })
    }

    pub fn train(&self) -> Result<TrainConfig> {
        let mode: PolluteMode = self
            .get("pollute_mode")
            .parse()
            .map_err(|e| anyhow!("pollute_mode: {e}"))?;
        Ok(TrainConfig {
            emb_dim: self.parse("emb_dim")?,
            enc_hidden: self.parse("enc_hidden")?,
            dec_hidden: self.parse("dec_hidden")?,
            layers: self.parse("layers")?,
            batch_size: self.parse("batch_size")?,
            lr: self.parse("lr")?,
            clip: self.parse("clip")?,
            lambda: self.parse("lambda")?,
            warmup_epochs: self.parse("warmup_epochs")?,
            bt_epochs: self.parse("bt_epochs")?,
            patience: self.parse("patience")?,
            use_classifier: self.flag("use_classifier")?,
            use_refinement: self.flag("use_refinement")?,
            use_style_noise: self.flag("use_style_noise")?,
            bt_dae_noise: self.flag("bt_dae_noise")?,
            bt_style_modeling: self.flag("bt_style_modeling")?,
            noise: NoiseSpec {
                drop_prob: self.parse("drop_prob")?,
                shuffle_window: self.parse("shuffle_window")?,
                p_sn: self.parse("p_sn")?,
                pollute_mode: mode,
            },
            seed: self.seed()?,
        })
    }

    /// `key = value` lines in key order; reading them back yields the same config.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn help() -> String {
        let mut s = String::new();
        for (k, v, doc) in keys() {
            let _ = writeln!(s, "  {k:<20} {doc} (default {v})");
        }
        s
    }
}
