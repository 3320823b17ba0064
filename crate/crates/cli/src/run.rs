//! Subcommand bodies. Every artifact lives in `out_dir`, and every command
//! that writes one also writes `manifest.<command>.txt`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use sedae::checkpoint::sha256_hex;
use sedae::classifier::TextCnn;
use sedae::corpus::{detokenize, CorpusStats, Style, StyleNames, TokenSeq, Vocab};
use sedae::eval::style_word_report;
use sedae::lexicon::StyleLexicon;
use sedae::model::Seq2Seq;
use sedae::pipeline::{evaluate, transfer_test, Data};
use sedae::refine::{dump, Scorer};
use sedae::rng::{derive_seed, tag};
use sedae::synth::{generate, ToySpec};
use sedae::train::{iterate, pretrain, translate_all, Resources, Trainer};
use sedae::wmd::{con_score, render_plan, signature, wmd_plan, WordEmbeddings};

use crate::config::RunConfig;

pub const VOCAB: &str = "vocab.txt";
pub const CLASSIFIER: &str = "classifier.ckpt";
pub const EVAL_CLASSIFIER: &str = "eval_classifier.ckpt";
pub const LEXICON: &str = "lexicon.tsv";
pub const PRETRAIN: &str = "pretrain.ckpt";
pub const MODEL: &str = "model.ckpt";
pub const METRICS: &str = "metrics.log";
pub const REPORT: &str = "report.txt";

pub struct Context {
    cfg: RunConfig,
    out: PathBuf,
    names: StyleNames,
}

/// Tracks the files a command read and wrote, for its manifest.
#[derive(Default)]
struct Manifest {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    notes: Vec<(String, String)>,
}

fn file_hash(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        let out = cfg.out_dir();
        let names = cfg.names();
        Ok(Self { cfg, out, names })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn ensure_out(&self) -> Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))
    }

    fn require(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.path(name);
        if !p.exists() {
            bail!("{} is missing; run `sedae {producer}` first", p.display());
        }
        Ok(p)
    }

    /// The resolved configuration as `key = value` lines, so `--config
    /// manifest.<command>.txt` reruns the command; hashes follow as comments.
    fn write_manifest(&self, command: &str, m: &Manifest) -> Result<()> {
        let mut s = format!("# sedae {command}\n");
        s.push_str(&self.cfg.render());
        for (k, v) in &m.notes {
            let _ = writeln!(s, "# {k} {v}");
        }
        for p in &m.inputs {
            let _ = writeln!(s, "# input {} sha256 {}", file_name(p), file_hash(p)?);
        }
        for p in &m.outputs {
            let _ = writeln!(s, "# output {} sha256 {}", file_name(p), file_hash(p)?);
        }
        let path = self.path(&format!("manifest.{command}.txt"));
        std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
    }

    fn vocab(&self, m: &mut Manifest) -> Result<Vocab> {
        let p = self.require(VOCAB, "prepare-vocab")?;
        m.inputs.push(p.clone());
        Ok(Vocab::load(&p)?)
    }

    fn data(&self, m: &mut Manifest) -> Result<Data> {
        let vocab = self.vocab(m)?;
        Ok(Data::load(
            &self.cfg.data_dir(),
            &self.names,
            Some(vocab),
            self.cfg.min_count()?,
        )?)
    }

    fn classifier(&self, name: &str, m: &mut Manifest) -> Result<TextCnn<f64>> {
        let producer = if name == EVAL_CLASSIFIER {
            "train-classifier --eval"
        } else {
            "train-classifier"
        };
        let p = self.require(name, producer)?;
        m.inputs.push(p.clone());
        Ok(TextCnn::load(&p)?)
    }

    fn lexicon(&self, vocab: &Vocab, m: &mut Manifest) -> Result<StyleLexicon> {
        let p = self.require(LEXICON, "extract-lexicon")?;
        m.inputs.push(p.clone());
        Ok(StyleLexicon::load(
            &p,
            vocab,
            &self.names,
            self.cfg.lexicon_threshold()?,
        )?)
    }

    fn model(&self, given: Option<&Path>, m: &mut Manifest) -> Result<Seq2Seq<f64>> {
        let p = match given {
            Some(p) => p.to_path_buf(),
            None => self.require(MODEL, "train")?,
        };
        m.inputs.push(p.clone());
        Ok(Seq2Seq::load(&p)?)
    }

    fn style(&self, name: &str) -> Result<Style> {
        Ok(self.names.parse(name)?)
    }

    fn encode(&self, text: &str, style: Style, vocab: &Vocab) -> Result<TokenSeq> {
        TokenSeq::from_line(text, style, Some(vocab))
            .with_context(|| format!("empty sentence {text:?}"))
    }

    pub fn make_toy(&self, train: usize, dev: usize, test: usize, seed: u64) -> Result<()> {
        let toy = generate(&ToySpec {
            train,
            dev,
            test,
            seed,
        });
        if toy.names != self.names {
            bail!(
                "the synthetic corpus uses styles {:?} and {:?}; set style_x and style_y to match",
                toy.names.x,
                toy.names.y
            );
        }
        let dir = self.cfg.data_dir();
        toy.write(&dir)?;
        println!("wrote synthetic corpus to {}", dir.display());
        Ok(())
    }

    pub fn prepare_vocab(&self) -> Result<()> {
        self.ensure_out()?;
        let data = Data::load(
            &self.cfg.data_dir(),
            &self.names,
            None,
            self.cfg.min_count()?,
        )?;
        let p = self.path(VOCAB);
        data.vocab.save(&p)?;
        println!("vocabulary {} entries -> {}", data.vocab.len(), p.display());
        self.write_manifest(
            "prepare-vocab",
            &Manifest {
                outputs: vec![p],
                ..Manifest::default()
            },
        )
    }

    pub fn train_classifier(&self, eval: bool) -> Result<()> {
        self.ensure_out()?;
        let mut m = Manifest::default();
        let data = self.data(&mut m)?;
        let (name, t) = if eval {
            (EVAL_CLASSIFIER, tag::EVAL_CLASSIFIER)
        } else {
            (CLASSIFIER, tag::CLASSIFIER)
        };
        let seed = derive_seed(self.cfg.seed()?, &[t]);
        let (cls, acc) = data.classifier(&self.cfg.cnn()?, &self.cfg.cls_training()?, seed)?;
        let p = self.path(name);
        cls.save(&p)?;
        println!("dev accuracy {:.4} -> {}", acc, p.display());
        m.outputs.push(p);
        m.notes.push(("dev_accuracy".into(), format!("{acc:.6}")));
        self.write_manifest(
            if eval {
                "train-classifier-eval"
            } else {
                "train-classifier"
            },
            &m,
        )
    }

    pub fn extract_lexicon(&self) -> Result<()> {
        self.ensure_out()?;
        let mut m = Manifest::default();
        let data = self.data(&mut m)?;
        let lex = data.lexicon(&self.cfg.lr_config()?, self.cfg.lexicon_threshold()?)?;
        let p = self.path(LEXICON);
        lex.save(&p, &data.vocab, &self.names)?;
        println!(
            "lexicon {} {} / {} {} -> {}",
            self.names.x,
            lex.sides[0].len(),
            self.names.y,
            lex.sides[1].len(),
            p.display()
        );
        m.outputs.push(p);
        self.write_manifest("extract-lexicon", &m)
    }

    pub fn pretrain(&self) -> Result<()> {
        self.ensure_out()?;
        let mut m = Manifest::default();
        let data = self.data(&mut m)?;
        let cls = self.classifier(CLASSIFIER, &mut m)?;
        let lex = self.lexicon(&data.vocab, &mut m)?;
        let tc = self.cfg.train()?;
        let res = Resources {
            vocab: &data.vocab,
            train: data.train_refs(),
            dev: data.dev_refs(),
            lexicon: &lex,
            classifier: &cls,
        };
        let trainer = pretrain(&tc, &res)?;
        let p = self.path(PRETRAIN);
        trainer.save(&p)?;
        println!("warmup checkpoint -> {}", p.display());
        m.outputs.push(p);
        self.write_manifest("pretrain", &m)
    }

    pub fn train(&self, init: Option<&Path>) -> Result<()> {
        self.ensure_out()?;
        let mut m = Manifest::default();
        let data = self.data(&mut m)?;
        let cls = self.classifier(CLASSIFIER, &mut m)?;
        let lex = self.lexicon(&data.vocab, &mut m)?;
        let tc = self.cfg.train()?;
        let res = Resources {
            vocab: &data.vocab,
            train: data.train_refs(),
            dev: data.dev_refs(),
            lexicon: &lex,
            classifier: &cls,
        };
        let trainer = match init {
            Some(p) => {
                m.inputs.push(p.to_path_buf());
                Trainer::load(p, tc.lr)?
            }
            None => pretrain(&tc, &res)?,
        };
        let metrics_path = self.path(METRICS);
        let mut metrics = std::fs::File::create(&metrics_path)
            .with_context(|| format!("creating {}", metrics_path.display()))?;
        let dump_refined = self.cfg.dump_refined();
        let mut dumps = Vec::new();
        let out = iterate(&tc, &res, trainer, &mut |rec, _, sets| {
            writeln!(metrics, "{}", rec.log_line())
                .map_err(|e| sedae::Error::io(&metrics_path, e))?;
            if dump_refined && rec.epoch > 0 {
                let p = self.path(&format!("refined.{}.tsv", rec.epoch));
                let all: Vec<_> = sets.iter().flatten().cloned().collect();
                dump(&all, &p)?;
                dumps.push(p);
            }
            Ok(())
        })?;
        drop(metrics);
        let p = self.path(MODEL);
        out.model.save(&p)?;
        println!(
            "best dev G2 at epoch {} -> {}",
            out.best_epoch,
            p.display()
        );
        m.notes.push(("best_epoch".into(), out.best_epoch.to_string()));
        m.outputs.push(p);
        m.outputs.push(metrics_path);
        m.outputs.extend(dumps);
        self.write_manifest("train", &m)
    }

    pub fn transfer(
        &self,
        to_style: &str,
        input: &Path,
        output: &Path,
        model: Option<&Path>,
    ) -> Result<()> {
        let target = self.style(to_style)?;
        let mut m = Manifest::default();
        let vocab = self.vocab(&mut m)?;
        let net = self.model(model, &mut m)?;
        let text = std::fs::read_to_string(input)
            .with_context(|| format!("reading {}", input.display()))?;
        let lines: Vec<&str> = text.lines().collect();
        let seqs: Vec<Option<TokenSeq>> = lines
            .iter()
            .map(|l| TokenSeq::from_line(l, target.opposite(), Some(&vocab)))
            .collect();
        let live: Vec<&[usize]> = seqs
            .iter()
            .flatten()
            .map(|s| s.ids.as_slice())
            .collect();
        let batch = self.cfg.train()?.batch_size;
        let mut decoded = translate_all(&net, &live, &vec![target; live.len()], batch)?.into_iter();
        let mut out = String::new();
        for s in &seqs {
            if s.is_some() {
                let ids = decoded.next().expect("one output per nonempty line");
                let toks: Vec<&str> = ids.iter().map(|&i| vocab.token(i)).collect();
                out.push_str(&detokenize(&toks));
            }
            out.push('\n');
        }
        std::fs::write(output, out).with_context(|| format!("writing {}", output.display()))?;
        m.inputs.push(input.to_path_buf());
        m.outputs.push(output.to_path_buf());
        self.ensure_out()?;
        self.write_manifest("transfer", &m)
    }

    pub fn evaluate(&self, model: Option<&Path>) -> Result<()> {
        self.ensure_out()?;
        let mut m = Manifest::default();
        let data = self.data(&mut m)?;
        let net = self.model(model, &mut m)?;
        let eval_cls = self.classifier(EVAL_CLASSIFIER, &mut m)?;
        let batch = self.cfg.train()?.batch_size;
        let tr = transfer_test(&net, &data, batch)?;
        let report = evaluate(&tr, &data, &eval_cls)?;
        let mut text = report.render(&self.names);
        if self.path(LEXICON).exists() {
            let lex = self.lexicon(&data.vocab, &mut m)?;
            for s in Style::BOTH {
                let r = style_word_report(&tr.outputs[s.index()], s, &lex, &data.vocab);
                let _ = write!(
                    text,
                    "style words {}-{}: {}",
                    self.names.name(s),
                    self.names.name(s.opposite()),
                    r.render()
                );
            }
        }
        for s in Style::BOTH {
            let p = self.path(&format!(
                "test.{}.to.{}",
                self.names.name(s),
                self.names.name(s.opposite())
            ));
            let mut body = String::new();
            for o in &tr.outputs[s.index()] {
                let toks: Vec<&str> = o.iter().map(|&i| data.vocab.token(i)).collect();
                body.push_str(&detokenize(&toks));
                body.push('\n');
            }
            std::fs::write(&p, body).with_context(|| format!("writing {}", p.display()))?;
            m.outputs.push(p);
        }
        print!("{text}");
        let p = self.path(REPORT);
        std::fs::write(&p, &text).with_context(|| format!("writing {}", p.display()))?;
        m.outputs.push(p);
        self.write_manifest("evaluate", &m)
    }

    fn scorer_parts(&self, m: &mut Manifest) -> Result<(Vocab, TextCnn<f64>, WordEmbeddings<f64>)> {
        let vocab = self.vocab(m)?;
        let cls = self.classifier(CLASSIFIER, m)?;
        let emb = WordEmbeddings::normalized(&cls.embed);
        Ok((vocab, cls, emb))
    }

    pub fn score_pair(&self, candidate: &str, original: &str, to_style: &str) -> Result<()> {
        let target = self.style(to_style)?;
        let mut m = Manifest::default();
        let (vocab, cls, emb) = self.scorer_parts(&mut m)?;
        let cand = self.encode(candidate, target, &vocab)?;
        let orig = self.encode(original, target.opposite(), &vocab)?;
        let scorer = Scorer {
            embeddings: &emb,
            classifier: Some(&cls),
        };
        let cs = scorer.cs_score(&cand.ids, &orig.ids, target)?;
        let con = con_score(&cand.ids, &orig.ids, &emb).ok();
        let sty = cls.sty_score(&cand.ids, target)?;
        match con {
            Some(c) => println!("con {c:.6}"),
            None => println!("con undefined (no scorable words)"),
        }
        println!("sty {sty:.6}");
        println!("cs {cs:.6}");
        Ok(())
    }

    pub fn wmd(&self, a: &str, b: &str) -> Result<()> {
        let mut m = Manifest::default();
        let (vocab, _, emb) = self.scorer_parts(&mut m)?;
        let sa = signature(&self.encode(a, Style::X, &vocab)?.ids, &emb)?;
        let sb = signature(&self.encode(b, Style::X, &vocab)?.ids, &emb)?;
        let plan = wmd_plan(&sa, &sb, &emb)?;
        println!("wmd {:.6}", plan.objective);
        print!("{}", render_plan(&plan, &sa, &sb, &vocab));
        Ok(())
    }

    pub fn stats(&self) -> Result<()> {
        print!(
            "{}",
            CorpusStats::collect(&self.cfg.data_dir(), &self.names)?.render()
        );
        Ok(())
    }
}
