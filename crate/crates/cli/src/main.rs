mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(
    name = "sedae",
    about = "Unsupervised text style transfer with a style-enhanced denoising auto-encoder"
)]
struct Cli {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batched decoding.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the synthetic two-style corpus into the data directory.
    MakeToy(ToyArgs),
    /// Build the vocabulary from the training split.
    PrepareVocab,
    /// Train the style classifier used during training, or with `--eval` the
    /// separately seeded one used for evaluation.
    TrainClassifier {
        #[arg(long)]
        eval: bool,
    },
    /// Fit the word-level regression and write the style lexicon.
    ExtractLexicon,
    /// Denoising style-modeling warmup only.
    Pretrain,
    /// Warmup (unless `--init` is given) and back-translation with refinement.
    Train(TrainArgs),
    /// Transfer a file line by line into a target style.
    Transfer {
        #[arg(long)]
        to_style: String,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Transfer the test split and report accuracy, BLEU, G2 and H2.
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Content, style and combined score of one candidate against its source.
    ScorePair {
        #[arg(long)]
        candidate: String,
        #[arg(long)]
        original: String,
        #[arg(long)]
        to_style: String,
    },
    /// Word mover's distance between two sentences, with the transport plan.
    Wmd {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Sentence counts per split and style.
    Stats,
}

#[derive(Args, Debug)]
struct ToyArgs {
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, default_value_t = 200)]
    dev: usize,
    #[arg(long, default_value_t = 200)]
    test: usize,
    #[arg(long, default_value_t = 17)]
    toy_seed: u64,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    no_classifier: bool,
    #[arg(long)]
    no_refinement: bool,
    #[arg(long)]
    no_style_noise: bool,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    bt_epochs: Option<usize>,
    /// Start back-translation from a pretrain checkpoint.
    #[arg(long)]
    init: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut o = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects key=value, got {kv:?}"))?;
            o.push((k.trim().to_string(), v.trim().to_string()));
        }
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        put("seed", self.seed.map(|s| s.to_string()));
        put("threads", self.threads.map(|s| s.to_string()));
        put("data_dir", self.data_dir.as_ref().map(|p| p.display().to_string()));
        put("out_dir", self.out_dir.as_ref().map(|p| p.display().to_string()));
        if let Command::Train(t) = &self.command {
            if t.no_classifier {
                put("use_classifier", Some("false".into()));
            }
            if t.no_refinement {
                put("use_refinement", Some("false".into()));
            }
            if t.no_style_noise {
                put("use_style_noise", Some("false".into()));
            }
            put("warmup_epochs", t.warmup_epochs.map(|n| n.to_string()));
            put("bt_epochs", t.bt_epochs.map(|n| n.to_string()));
        }
        Ok(o)
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(cli.config.as_deref(), std::env::vars(), &cli.overrides()?)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads()?)
        .build_global()?;
    let ctx = run::Context::new(cfg)?;
    match cli.command {
        Command::MakeToy(a) => ctx.make_toy(a.train, a.dev, a.test, a.toy_seed),
        Command::PrepareVocab => ctx.prepare_vocab(),
        Command::TrainClassifier { eval } => ctx.train_classifier(eval),
        Command::ExtractLexicon => ctx.extract_lexicon(),
        Command::Pretrain => ctx.pretrain(),
        Command::Train(a) => ctx.train(a.init.as_deref()),
        Command::Transfer {
            to_style,
            input,
            output,
            model,
        } => ctx.transfer(&to_style, &input, &output, model.as_deref()),
        Command::Evaluate { model } => ctx.evaluate(model.as_deref()),
        Command::ScorePair {
            candidate,
            original,
            to_style,
        } => ctx.score_pair(&candidate, &original, &to_style),
        Command::Wmd { a, b } => ctx.wmd(&a, &b),
        Command::Stats => ctx.stats(),
    }
}

const SUB_SET: &str = "sub_set";

fn command() -> clap::Command {
    Cli::command()
        .mut_subcommands(|sub| {
            sub.arg(
                clap::Arg::new(SUB_SET)
                    .long("set")
                    .value_name("KEY=VALUE")
                    .action(clap::ArgAction::Append)
                    .help("Any configuration key, as `key=value`; repeatable."),
            )
        })
        .after_long_help(format!(
            "Configuration keys (config file < SEDAE_<KEY> environment < --set and flags):\n{}",
            RunConfig::help()
        ))
}

/// `--set` before the subcommand applies first, then the ones after it.
fn parse<I, T>(args: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let m = command().try_get_matches_from(args)?;
    let mut cli = Cli::from_arg_matches(&m)?;
    if let Some(after) = m.subcommand().and_then(|(_, sub)| sub.get_many::<String>(SUB_SET)) {
        cli.set.extend(after.cloned());
    }
    Ok(cli)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match parse(std::env::args_os()) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_before_and_after_the_subcommand_accumulates_in_order() {
        let cli = parse(["sedae", "--set", "lr=1", "--set", "emb_dim=8", "train", "--set", "lr=2"]).unwrap();
        let o = cli.overrides().unwrap();
        let keys: Vec<_> = o.iter().map(|(k, v)| format!("{k}={v}")).collect();
        assert_eq!(keys, ["lr=1", "emb_dim=8", "lr=2"]);
    }

    #[test]
    fn set_works_on_every_subcommand() {
        for sub in ["prepare-vocab", "stats", "pretrain", "evaluate", "make-toy"] {
            let cli = parse(["sedae", sub, "--set", "seed=3"]).unwrap();
            assert_eq!(cli.set, ["seed=3"], "{sub}");
        }
    }
}
