//! Full pipeline on the synthetic corpus with timing, for tuning.

use std::time::Instant;

use sedae::classifier::{ClassifierTraining, CnnConfig};
use sedae::lexicon::LrConfig;
use sedae::noise::{NoiseSpec, PolluteMode};
use sedae::pipeline::{evaluate, self_bleu, transfer_test, Data};
use sedae::synth::{generate, ToySpec};
use sedae::train::{iterate, pretrain, Resources, TrainConfig};

fn main() -> sedae::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let t0 = Instant::now();
    let data = Data::from_toy(&generate(&ToySpec::default()), 1);
    let cnn = CnnConfig {
        emb_dim: 32,
        ..CnnConfig::default()
    };
    let hyper = ClassifierTraining {
        epochs: 3,
        ..ClassifierTraining::default()
    };
    let (cls, acc) = data.classifier(&cnn, &hyper, 1000 + seed)?;
    let (eval_cls, eacc) = data.classifier(&cnn, &hyper, 2000 + seed)?;
    let lex = data.lexicon(&LrConfig::default(), 0.9)?;
    println!(
        "vocab {} cls {acc:.3} eval {eacc:.3} lexicon {}/{} [{:.1}s]",
        data.vocab.len(),
        lex.sides[0].len(),
        lex.sides[1].len(),
        t0.elapsed().as_secs_f64()
    );
    let env = |k: &str, d: f64| {
        std::env::var(k)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(d)
    };
    let cfg = TrainConfig {
        emb_dim: 32,
        enc_hidden: 32,
        dec_hidden: 32,
        batch_size: env("TOY_BS", 32.0) as usize,
        lr: env("TOY_LR", 1e-3),
        warmup_epochs: env("TOY_WARMUP", 5.0) as usize,
        bt_epochs: env("TOY_BT", 10.0) as usize,
        lambda: env("TOY_LAMBDA", 0.3),
        use_classifier: env("TOY_CLS", 1.0) > 0.0,
        use_refinement: env("TOY_REF", 1.0) > 0.0,
        use_style_noise: env("TOY_SN", 1.0) > 0.0,
        noise: NoiseSpec {
            pollute_mode: std::env::var("TOY_MODE")
                .ok()
                .and_then(|m| m.parse().ok())
                .unwrap_or(PolluteMode::Replace),
            ..NoiseSpec::default()
        },
        seed,
        ..TrainConfig::default()
    };
    let res = Resources {
        vocab: &data.vocab,
        train: data.train_refs(),
        dev: data.dev_refs(),
        lexicon: &lex,
        classifier: &cls,
    };
    let trainer = pretrain(&cfg, &res)?;
    println!("warmup done [{:.1}s]", t0.elapsed().as_secs_f64());
    let out = iterate(&cfg, &res, trainer, &mut |r, _, _| {
        println!("{} [{:.1}s]", r.log_line(), t0.elapsed().as_secs_f64());
        Ok(())
    })?;
    let tr = transfer_test(&out.model, &data, 64)?;
    let report = evaluate(&tr, &data, &eval_cls)?;
    print!("{}", report.render(&data.names));
    for s in 0..2 {
        println!(
            "self-bleu {:.2}",
            self_bleu(&tr.outputs[s], &data.test[s], &data.vocab)?
        );
        for o in tr.outputs[s].iter().take(3) {
            println!(
                "  {}",
                o.iter()
                    .map(|&i| data.vocab.token(i))
                    .collect::<Vec<_>>()
                    .join(" ")
            );
        }
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
