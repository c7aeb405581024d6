use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_joint-cws"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Generates a small corpus and trains a tiny model for `epochs` epochs.
fn small_run(dir: &Path, run_name: &str, epochs: &str) -> std::path::PathBuf {
    let data = dir.join("data");
    if !data.exists() {
        ok(&[
            "gen-corpus",
            "--out",
            p(&data),
            "--seed",
            "3",
            "--train-size",
            "60",
            "--dev-size",
            "12",
        ]);
    }
    let config = dir.join(format!("{run_name}.toml"));
    fs::write(
        &config,
        format!(
            "train = 'data/train.txt'\ndev = 'data/dev.txt'\nout = '{run_name}'\n\
             embedding_dim = 8\nlstm_hidden = 8\nlstm_layers = 1\narc_mlp = 8\nlabel_mlp = 4\n\
             batch_size = 8\nseed = 5\n"
        ),
    )
    .unwrap();
    ok(&["train", "--config", p(&config), "--max-epochs", epochs]);
    dir.join(run_name)
}

#[test]
fn gen_train_parse_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_run(dir.path(), "run", "2");
    for f in [
        "epoch-001.cpkt",
        "epoch-002.cpkt",
        "best.cpkt",
        "model.json",
        "manifest.json",
        "train.log",
    ] {
        assert!(model.join(f).exists(), "missing {f}");
    }
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(model.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["train"]["max_epochs"], 2);
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["epochs"].as_array().unwrap().len(), 2);
    let log = fs::read_to_string(model.join("train.log")).unwrap();
    assert_eq!(log.lines().count(), 2);

    let data = dir.path().join("data");
    let pred = dir.path().join("pred.txt");
    ok(&[
        "parse",
        "--model",
        p(&model),
        "--input",
        p(&data.join("dev.raw.txt")),
        "--output",
        p(&pred),
    ]);
    let reread = joint_cws::treebank::read_corpus(&fs::read_to_string(&pred).unwrap()).unwrap();
    assert_eq!(reread.len(), 12);

    let out = ok(&[
        "eval",
        "--gold",
        p(&data.join("dev.txt")),
        "--pred",
        p(&pred),
    ]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let keys = [
        "seg_p",
        "seg_r",
        "seg_f1",
        "udep_p",
        "uas",
        "udep_f1",
        "ldep_p",
        "las",
        "ldep_f1",
        "correct_pct",
        "seg_wrong_pct",
        "head_wrong_pct",
    ];
    for k in keys {
        let v = report[k].as_f64().unwrap_or_else(|| panic!("missing {k}"));
        assert!(v.is_finite());
    }
    assert_eq!(report.as_object().unwrap().len(), keys.len());

    let out = ok(&[
        "analyze",
        "--gold",
        p(&data.join("dev.txt")),
        "--pred",
        p(&pred),
    ]);
    let b: Value = serde_json::from_slice(&out.stdout).unwrap();
    let total: f64 = ["correct_pct", "seg_wrong_pct", "head_wrong_pct"]
        .iter()
        .map(|k| b[*k].as_f64().unwrap())
        .sum();
    assert!((total - 100.0).abs() < 1e-9);
}

#[test]
fn runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_run(dir.path(), "a", "2");
    let b = small_run(dir.path(), "b", "2");
    for f in [
        "epoch-001.cpkt",
        "epoch-002.cpkt",
        "best.cpkt",
        "model.json",
        "manifest.json",
        "train.log",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let raw = dir.path().join("data/dev.raw.txt");
    let pa = ok(&["parse", "--model", p(&a), "--input", p(&raw)]).stdout;
    let pb = ok(&["parse", "--model", p(&b), "--input", p(&raw)]).stdout;
    assert_eq!(pa, pb);
}

#[test]
fn gold_against_itself_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "gen-corpus",
        "--out",
        p(dir.path()),
        "--train-size",
        "5",
        "--dev-size",
        "20",
    ]);
    let dev = dir.path().join("dev.txt");
    let out = ok(&["eval", "--gold", p(&dev), "--pred", p(&dev)]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in ["seg_f1", "udep_f1", "ldep_f1", "uas", "las"] {
        assert_eq!(r[k].as_f64().unwrap(), 1.0, "{k}");
    }
    assert_eq!(r["correct_pct"].as_f64().unwrap(), 100.0);
}

#[test]
fn corrupted_checkpoint_exits_2_naming_the_magic() {
    let dir = tempfile::tempdir().unwrap();
    let model = small_run(dir.path(), "run", "1");
    let mut bytes = fs::read(model.join("best.cpkt")).unwrap();
    bytes[0] = b'X';
    fs::write(model.join("best.cpkt"), bytes).unwrap();
    let out = run(&[
        "parse",
        "--model",
        p(&model),
        "--input",
        p(&dir.path().join("data/dev.raw.txt")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CPKT1"));
}

#[test]
fn missing_files_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let nope = dir.path().join("nope.txt");
    let out = run(&["eval", "--gold", p(&nope), "--pred", p(&nope)]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["train", "--config", p(&nope)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn validation_failures_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "上海\t5\tnsubj\n\n").unwrap();
    let out = run(&["eval", "--gold", p(&bad), "--pred", p(&bad)]);
    assert_eq!(out.status.code(), Some(3));

    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "train = 'x'\ndev = 'y'\nout = 'z'\nlearning_rate = 0.1\n",
    )
    .unwrap();
    let out = run(&["train", "--config", p(&cfg)]);
    assert_eq!(out.status.code(), Some(3));

    ok(&[
        "gen-corpus",
        "--out",
        p(dir.path()),
        "--train-size",
        "5",
        "--dev-size",
        "6",
    ]);
    let out = run(&[
        "eval",
        "--gold",
        p(&dir.path().join("dev.txt")),
        "--pred",
        p(&dir.path().join("train.txt")),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn usage_errors_and_help() {
    let out = run(&["frobnicate"]);
    assert!(!out.status.success());
    let out = run(&["eval", "--gold", "g.txt", "--pred", "p.txt", "--frob"]);
    assert!(!out.status.success());
    let out = run(&["--help"]);
    assert!(out.status.success());
    let usage = String::from_utf8_lossy(&out.stdout);
    for verb in ["gen-corpus", "train", "parse", "eval", "analyze"] {
        assert!(usage.contains(verb), "{verb} missing from usage");
    }
}
