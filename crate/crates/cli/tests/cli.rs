use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &[&str] = &[
    "--num-layers", "1", "--num-heads", "2", "--embed-dim", "16", "--ffn-dim", "32",
    "--max-seq-len", "64", "--epochs", "1", "--batch-size", "8",
];

fn storyloom(args: &[String]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_storyloom"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[String]) -> String {
    let out = storyloom(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Builds an argument list; path-like entries are joined onto `dir` when
/// prefixed with `@`.
fn args(dir: &Path, items: &[&str]) -> Vec<String> {
    items
        .iter()
        .map(|s| match s.strip_prefix('@') {
            Some(rel) => dir.join(rel).to_str().unwrap().to_string(),
            None => s.to_string(),
        })
        .collect()
}

/// Small synthetic corpus split into train/valid/test plus a mined table.
fn prepare(d: &Path) {
    ok(&args(d, &["synth", "--out-dir", "@", "--seed", "3", "--episodes", "6"]));
    ok(&args(
        d,
        &["split", "@corpus.jsonl", "--out-dir", "@", "--train", "0.6", "--valid", "0.2", "--test", "0.2", "--seed", "3"],
    ));
    ok(&args(d, &["mine-relations", "@relations.jsonl", "--out", "@table.tsv", "--seed", "3"]));
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn with_small(mut a: Vec<String>) -> Vec<String> {
    a.extend(SMALL.iter().map(|s| s.to_string()));
    a
}

#[test]
fn synth_split_and_mining_are_byte_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    prepare(a.path());
    prepare(b.path());
    for f in ["corpus.jsonl", "relations.jsonl", "train.jsonl", "valid.jsonl", "test.jsonl", "table.tsv"] {
        assert_eq!(read(&a.path().join(f)), read(&b.path().join(f)), "{f}");
    }
    let stats = ok(&args(a.path(), &["stats", "@corpus.jsonl"]));
    assert!(stats.starts_with("chunks\t60\n"), "{stats}");
}

#[test]
fn train_is_deterministic_and_checkpoint_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    for out in ["@run1", "@run2"] {
        ok(&with_small(args(
            d,
            &["train", "--train", "@train.jsonl", "--valid", "@valid.jsonl", "--relations", "@table.tsv", "--out-dir", out],
        )));
    }
    for f in ["metrics.tsv", "config.txt", "vocab.txt", "model.ckpt"] {
        assert_eq!(read(&d.join("run1").join(f)), read(&d.join("run2").join(f)), "{f}");
    }
    let config = String::from_utf8(read(&d.join("run1/config.txt"))).unwrap();
    assert!(config.contains("embed_dim = 16"), "{config}");

    let eval = |out: &str| {
        ok(&args(
            d,
            &[
                "evaluate", "--model", "@run1/model.ckpt", "--corpus", "@test.jsonl", "--relations", "@table.tsv",
                "--hits-levels", "1,10", "--out", out,
            ],
        ))
    };
    let shown = eval("@eval.tsv");
    assert!(shown.contains("hits@10/10"), "{shown}");
    // the gold is always somewhere among all ten candidates
    assert!(shown.trim_end().ends_with("| 100.0 |"), "{shown}");
    eval("@eval2.tsv");
    assert_eq!(read(&d.join("eval.tsv")), read(&d.join("eval2.tsv")));
}

#[test]
fn history_ablation_emits_one_row_per_length() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    for out in ["@a", "@b"] {
        ok(&with_small(args(
            d,
            &[
                "ablate-history", "--train", "@train.jsonl", "--valid", "@valid.jsonl", "--test", "@test.jsonl",
                "--relations", "@table.tsv", "--lengths", "1,2", "--out-dir", out,
            ],
        )));
    }
    for f in ["history.tsv", "history.md", "history.raw.tsv", "config.txt", "logs/history-1.metrics.tsv"] {
        assert_eq!(read(&d.join("a").join(f)), read(&d.join("b").join(f)), "{f}");
    }
    let tsv = String::from_utf8(read(&d.join("a/history.tsv"))).unwrap();
    assert_eq!(tsv.lines().count(), 3, "{tsv}");
    assert!(tsv.starts_with("history\t"), "{tsv}");

    // re-rendering the raw numbers reproduces the human table
    ok(&args(d, &["report", "@a/history.raw.tsv", "--keys", "1", "--format", "tsv", "--out", "@regen.tsv"]));
    assert_eq!(read(&d.join("regen.tsv")), read(&d.join("a/history.tsv")));
}

#[test]
fn config_file_is_applied_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    fs::write(d.join("cfg.txt"), "embed_dim = 8\nnum_heads = 2\nffn_dim = 16\nepochs = 3\n").unwrap();
    ok(&args(
        d,
        &[
            "train", "--train", "@train.jsonl", "--valid", "@valid.jsonl", "--out-dir", "@run", "--config", "@cfg.txt",
            "--num-layers", "1", "--max-seq-len", "32", "--epochs", "1",
        ],
    ));
    let resolved = String::from_utf8(read(&d.join("run/config.txt"))).unwrap();
    assert!(resolved.contains("embed_dim = 8"), "{resolved}");
    assert!(resolved.contains("epochs = 1"), "{resolved}");
    let metrics = String::from_utf8(read(&d.join("run/metrics.tsv"))).unwrap();
    assert_eq!(metrics.lines().count(), 2, "{metrics}");
}

#[test]
fn gradcheck_passes_on_the_toy_model() {
    let out = ok(&args(Path::new("."), &["gradcheck", "--loss", "joint"]));
    assert!(out.starts_with("PASS\tjoint"), "{out}");
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let missing = storyloom(&args(d, &["stats", "@nope.jsonl"]));
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error:"));

    prepare(d);
    let bad = storyloom(&args(
        d,
        &["train", "--train", "@train.jsonl", "--valid", "@valid.jsonl", "--out-dir", "@run", "--batch-size", "1"],
    ));
    assert!(!bad.status.success());
    assert!(!d.join("run").exists());

    fs::write(d.join("cfg.txt"), "no_such_key = 3\n").unwrap();
    let unknown = storyloom(&args(
        d,
        &["train", "--train", "@train.jsonl", "--valid", "@valid.jsonl", "--out-dir", "@run", "--config", "@cfg.txt"],
    ));
    assert!(!unknown.status.success());
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("no_such_key"));
}

#[test]
fn ingest_vocab_and_multitask_grid() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    prepare(d);
    let summary = ok(&args(d, &["ingest", "@train.jsonl", "--out", "@again.jsonl"]));
    assert!(summary.starts_with("40 chunks, "), "{summary}");
    assert_eq!(read(&d.join("again.jsonl")), read(&d.join("train.jsonl")));

    let shown = ok(&args(d, &["build-vocab", "@train.jsonl", "--min-freq", "2", "--out", "@vocab.txt"]));
    assert!(shown.ends_with(" tokens\n"), "{shown}");
    assert!(String::from_utf8(read(&d.join("vocab.txt"))).unwrap().starts_with("#storyloom-vocab\t"));

    ok(&with_small(args(
        d,
        &[
            "ablate-multitask", "--train", "@train.jsonl", "--valid", "@valid.jsonl", "--test", "@test.jsonl",
            "--relations", "@table.tsv", "--variants", "base,base+relations", "--out-dir", "@grid",
        ],
    )));
    let md = String::from_utf8(read(&d.join("grid/multitask.md"))).unwrap();
    // header, rule, then two variants × two modes
    assert_eq!(md.lines().count(), 6, "{md}");
    let pivot = String::from_utf8(read(&d.join("grid/multitask_pivot.md"))).unwrap();
    assert!(pivot.contains("story_continuation/hits@1/10/multi"), "{pivot}");
    assert!(d.join("grid/logs/base.single.rank.metrics.tsv").exists());
}
