use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "cnn_emb_dim=8",
    "cnn_filters=4",
    "cls_epochs=1",
    "emb_dim=8",
    "enc_hidden=8",
    "dec_hidden=8",
    "batch_size=16",
    "lr=0.003",
    "warmup_epochs=1",
    "bt_epochs=1",
    "min_count=1",
    "lexicon_threshold=0.8",
];

struct Run {
    data: PathBuf,
    out: PathBuf,
}

impl Run {
    fn sedae(&self, args: &[&str]) -> Output {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sedae"));
        cmd.env("RUST_LOG", "warn")
            .arg("--data-dir")
            .arg(&self.data)
            .arg("--out-dir")
            .arg(&self.out);
        for kv in SMALL {
            cmd.args(["--set", kv]);
        }
        cmd.args(args).output().expect("spawn sedae")
    }

    fn ok(&self, args: &[&str]) -> String {
        let o = self.sedae(args);
        assert!(
            o.status.success(),
            "sedae {args:?} failed:\n{}",
            String::from_utf8_lossy(&o.stderr)
        );
        String::from_utf8(o.stdout).unwrap()
    }

    fn read(&self, name: &str) -> Vec<u8> {
        std::fs::read(self.out.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
    }
}

fn setup(root: &Path, out: &str) -> Run {
    let run = Run {
        data: root.join("data"),
        out: root.join(out),
    };
    if !run.data.join("train.pos").exists() {
        run.ok(&["make-toy", "--train", "160", "--dev", "30", "--test", "20"]);
    }
    run.ok(&["prepare-vocab"]);
    run.ok(&["train-classifier"]);
    run.ok(&["train-classifier", "--eval"]);
    run.ok(&["extract-lexicon"]);
    run
}

const ARTIFACTS: &[&str] = &[
    "vocab.txt",
    "classifier.ckpt",
    "eval_classifier.ckpt",
    "lexicon.tsv",
    "model.ckpt",
    "metrics.log",
    "report.txt",
    "test.pos.to.neg",
    "test.neg.to.pos",
    "manifest.train.txt",
];

#[test]
fn full_pipeline_is_byte_identical_across_runs() {
    let root = tempfile::tempdir().unwrap();
    let run = setup(root.path(), "out");
    run.ok(&["train"]);
    let report = run.ok(&["evaluate"]);
    assert!(report.contains("RESULT dir=all"), "{report}");
    let first: Vec<Vec<u8>> = ARTIFACTS.iter().map(|a| run.read(a)).collect();

    let again = setup(root.path(), "out");
    again.ok(&["train"]);
    again.ok(&["evaluate"]);
    for (name, bytes) in ARTIFACTS.iter().zip(&first) {
        assert_eq!(&again.read(name), bytes, "{name} differs between runs");
    }
    let manifest = String::from_utf8(run.read("manifest.train.txt")).unwrap();
    assert!(manifest.contains("# output model.ckpt sha256 "));
    assert!(manifest.contains("seed = 0"));
}

#[test]
fn transfer_keeps_line_alignment_and_ignores_thread_count() {
    let root = tempfile::tempdir().unwrap();
    let run = setup(root.path(), "out");
    run.ok(&["train", "--bt-epochs", "0"]);
    let input = root.path().join("in.txt");
    std::fs::write(
        &input,
        "the pizza was great .\n\n  \nour waiter was friendly and the soup came out quickly .\nzzz unknownword\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = root.path().join(format!("out.{threads}.txt"));
        run.ok(&[
            "--threads",
            threads,
            "transfer",
            "--to-style",
            "neg",
            "--input",
            input.to_str().unwrap(),
            "--output",
            out.to_str().unwrap(),
        ]);
        let text = std::fs::read_to_string(&out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5, "{text:?}");
        assert!(lines[1].is_empty() && lines[2].is_empty());
        assert!(!lines[0].is_empty() && !lines[3].is_empty() && !lines[4].is_empty());
        outputs.push(text);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn vanilla_flags_stop_after_warmup_and_match_pretrain() {
    let root = tempfile::tempdir().unwrap();
    let run = setup(root.path(), "out");
    run.ok(&[
        "train",
        "--no-classifier",
        "--no-refinement",
        "--no-style-noise",
        "--bt-epochs",
        "0",
    ]);
    let metrics = String::from_utf8(run.read("metrics.log")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(metrics.starts_with("epoch 0 acc "), "{metrics}");
    let manifest = String::from_utf8(run.read("manifest.train.txt")).unwrap();
    assert!(manifest.contains("use_classifier = false"));
    assert!(manifest.contains("use_refinement = false"));
    assert!(manifest.contains("use_style_noise = false"));
    let vanilla = run.read("model.ckpt");

    run.ok(&["pretrain"]);
    let pre = run.out.join("pretrain.ckpt");
    run.ok(&["train", "--bt-epochs", "0", "--init", pre.to_str().unwrap()]);
    let resumed = sedae::model::Seq2Seq::<f64>::load(&run.out.join("model.ckpt")).unwrap();
    let direct = {
        let p = root.path().join("vanilla.ckpt");
        std::fs::write(&p, &vanilla).unwrap();
        sedae::model::Seq2Seq::<f64>::load(&p).unwrap()
    };
    assert_eq!(resumed, direct);
}

#[test]
fn resuming_from_pretrain_equals_one_training_run() {
    let root = tempfile::tempdir().unwrap();
    let run = setup(root.path(), "out");
    run.ok(&["train", "--set", "dump_refined=true"]);
    let direct = run.read("model.ckpt");
    assert!(run.out.join("refined.1.tsv").exists());
    let dump = String::from_utf8(run.read("refined.1.tsv")).unwrap();
    let first = dump.lines().next().unwrap();
    assert_eq!(first.split('\t').count(), 3, "{first}");

    run.ok(&["pretrain"]);
    let pre = run.out.join("pretrain.ckpt");
    run.ok(&["train", "--init", pre.to_str().unwrap()]);
    assert_eq!(run.read("model.ckpt"), direct);
}

#[test]
fn debugging_commands_report_scores() {
    let root = tempfile::tempdir().unwrap();
    let run = setup(root.path(), "out");
    let out = run.ok(&[
        "score-pair",
        "--candidate",
        "the pizza was terrible .",
        "--original",
        "the pizza was great .",
        "--to-style",
        "neg",
    ]);
    assert!(out.contains("con ") && out.contains("sty ") && out.contains("cs "), "{out}");
    let out = run.ok(&["wmd", "--a", "the pizza was great .", "--b", "the pizza was great ."]);
    assert!(out.starts_with("wmd 0.000000"), "{out}");
    let out = run.ok(&["stats"]);
    assert!(out.contains("train") && out.contains("160"), "{out}");
}

#[test]
fn bad_invocations_fail_with_usage() {
    let root = tempfile::tempdir().unwrap();
    let run = Run {
        data: root.path().join("data"),
        out: root.path().join("out"),
    };
    let o = run.sedae(&["frobnicate"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    let o = run.sedae(&["--set", "learning_rate=1", "stats"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown configuration key"));
    let o = run.sedae(&["train"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("prepare-vocab"));
}
