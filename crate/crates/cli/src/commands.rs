use std::fmt::Write as _;
use std::path::Path;

use joint_cws::decoder::{parse_batch, DecodeConfig};
use joint_cws::encoder::Pretrained;
use joint_cws::metrics::{evaluate_corpus, EvalReport};
use joint_cws::model::{ModelMeta, ModelParams};
use joint_cws::tensor::write_checkpoint;
use joint_cws::trainer::{init_model, sha256_hex, train as run_training, Manifest};
use joint_cws::treebank::{synth_split, write_corpus, Corpus, Sentence, WordTree};
use joint_cws::Error;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunSpec;
use crate::error::{CliError, Result};
use crate::io::{create_dir, read_bytes, read_corpus_file, read_text, write};

const ORDERS: [&str; 3] = ["unigram", "bigram", "trigram"];
const MODEL_FILE: &str = "model.json";
const BEST: &str = "best.cpkt";

/// `model.json` in a trained model directory.
#[derive(Debug, Serialize, Deserialize)]
struct ModelFile {
    #[serde(flatten)]
    meta: ModelMeta,
    /// Copies of the pre-trained vector files, relative to the directory.
    pretrained: [Option<String>; 3],
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn gen_corpus(out: &Path, seed: u64, n_train: usize, n_dev: usize) -> Result<()> {
    if n_train == 0 || n_dev == 0 {
        return Err(CliError::Config(
            "train and dev sizes must both be positive".into(),
        ));
    }
    let (train, dev) = synth_split(seed, n_train, n_dev);
    create_dir(out)?;
    write(&out.join("train.txt"), write_corpus(&train))?;
    write(&out.join("dev.txt"), write_corpus(&dev))?;
    let raw: String = dev.sentences().map(|s| s.text() + "\n").collect();
    write(&out.join("dev.raw.txt"), raw)?;
    eprintln!(
        "wrote {} train and {} dev sentences to {}",
        train.len(),
        dev.len(),
        out.display()
    );
    Ok(())
}

fn checkpoint_bytes(m: &ModelParams<f32>) -> Vec<u8> {
    let mut bytes = Vec::new();
    write_checkpoint(&m.store, &mut bytes).expect("in-memory write");
    bytes
}

pub fn train(spec: &RunSpec) -> Result<()> {
    let train_text = read_text(&spec.train_path)?;
    let dev_text = read_text(&spec.dev_path)?;
    let train = joint_cws::treebank::read_corpus(&train_text)
        .map_err(|e| CliError::invalid(&spec.train_path, e))?;
    let dev = joint_cws::treebank::read_corpus(&dev_text)
        .map_err(|e| CliError::invalid(&spec.dev_path, e))?;

    let used = if spec.model.use_ngrams { 3 } else { 1 };
    let mut texts: [Option<String>; 3] = [None, None, None];
    let mut pretrained: [Option<Pretrained<f32>>; 3] = [None, None, None];
    for (k, path) in spec.pretrained.iter().enumerate().take(used) {
        if let Some(path) = path {
            let text = read_text(path)?;
            pretrained[k] = Some(
                Pretrained::parse(&text, spec.model.embedding_dim)
                    .map_err(|e| CliError::invalid(path, e))?,
            );
            texts[k] = Some(text);
        }
    }

    let model = init_model::<f32>(spec.model.clone(), &spec.train, &train, pretrained)
        .map_err(|e| CliError::invalid(&spec.train_path, e))?;
    create_dir(&spec.out)?;
    let out = &spec.out;
    let mut log = String::new();
    let outcome = run_training(model, &spec.train, &train, &dev, |record, m| {
        let line = record.log_line();
        eprintln!("{line}");
        writeln!(log, "{line}").expect("string write");
        let name = format!("epoch-{:03}.cpkt", record.epoch);
        std::fs::write(out.join(name), checkpoint_bytes(m))?;
        std::fs::write(out.join("train.log"), &log)?;
        Ok(())
    })?;

    write(&out.join(BEST), checkpoint_bytes(&outcome.best))?;
    let mut names: [Option<String>; 3] = [None, None, None];
    for (k, text) in texts.iter().enumerate() {
        if let Some(text) = text {
            let name = format!("pretrained.{}.txt", ORDERS[k]);
            write(&out.join(&name), text)?;
            names[k] = Some(name);
        }
    }
    let model_file = ModelFile {
        meta: outcome.best.meta(),
        pretrained: names,
    };
    write(&out.join(MODEL_FILE), to_json(&model_file))?;
    let manifest = Manifest {
        model: spec.model.clone(),
        train: spec.train.clone(),
        seed: spec.train.seed,
        train_corpus_sha256: sha256_hex(train_text.as_bytes()),
        dev_corpus_sha256: sha256_hex(dev_text.as_bytes()),
        pretrained_sha256: texts
            .iter()
            .map(|t| t.as_ref().map(|t| sha256_hex(t.as_bytes())))
            .collect(),
        best_epoch: outcome.best_epoch,
        epochs: outcome.epochs,
    };
    write(&out.join("manifest.json"), to_json(&manifest))?;
    let r = &outcome.best_report;
    eprintln!(
        "best epoch {}: dev seg {:.4}  udep {:.4}  ldep {:.4}",
        outcome.best_epoch, r.seg.f1, r.udep.f1, r.ldep.f1
    );
    Ok(())
}

fn load_model(dir: &Path, checkpoint: Option<&Path>) -> Result<ModelParams<f32>> {
    let meta_path = dir.join(MODEL_FILE);
    let file: ModelFile = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|e| CliError::invalid(&meta_path, e.into()))?;
    let mut pretrained: [Option<Pretrained<f32>>; 3] = [None, None, None];
    for (k, name) in file.pretrained.iter().enumerate() {
        if let Some(name) = name {
            let path = dir.join(name);
            pretrained[k] = Some(
                Pretrained::parse(&read_text(&path)?, file.meta.config.embedding_dim)
                    .map_err(|e| CliError::invalid(&path, e))?,
            );
        }
    }
    let ckpt = checkpoint.map_or_else(|| dir.join(BEST), Path::to_path_buf);
    let bytes = read_bytes(&ckpt)?;
    ModelParams::load(file.meta, pretrained, &bytes[..]).map_err(|e| match e {
        Error::Checkpoint(_) => CliError::Checkpoint {
            path: ckpt,
            source: e,
        },
        e => CliError::invalid(&meta_path, e),
    })
}

fn read_raw(path: &Path) -> Result<Vec<Sentence>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let line = line.strip_suffix('\r').unwrap_or(line);
            let bad = |msg: &str| {
                CliError::invalid(
                    path,
                    Error::Parse {
                        line: i + 1,
                        message: msg.into(),
                    },
                )
            };
            if line.is_empty() {
                return Err(bad("empty sentence"));
            }
            if line.chars().any(char::is_whitespace) {
                return Err(bad(
                    "whitespace inside a sentence; expected unsegmented text",
                ));
            }
            Sentence::new(line).map_err(|e| bad(&e.to_string()))
        })
        .collect()
}

pub fn parse(
    model_dir: &Path,
    checkpoint: Option<&Path>,
    input: &Path,
    output: Option<&Path>,
) -> Result<()> {
    let m = load_model(model_dir, checkpoint)?;
    let sentences = read_raw(input)?;
    let refs: Vec<&Sentence> = sentences.iter().collect();
    let parsed = parse_batch(&refs, &m, DecodeConfig::new(m.config.mode))?;
    let text = if sentences.is_empty() {
        String::new()
    } else {
        let items = sentences
            .into_iter()
            .zip(parsed)
            .map(|(s, (wt, _))| (s, wt))
            .collect();
        write_corpus(&Corpus::new(items)?)
    };
    match output {
        Some(path) => write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn compare(gold_path: &Path, pred_path: &Path) -> Result<EvalReport> {
    let gold = read_corpus_file(gold_path)?;
    let pred = read_corpus_file(pred_path)?;
    if gold.len() != pred.len() {
        return Err(CliError::invalid(
            pred_path,
            Error::Input(format!("{} sentences, gold has {}", pred.len(), gold.len())),
        ));
    }
    for (i, (g, p)) in gold.sentences().zip(pred.sentences()).enumerate() {
        if g.chars() != p.chars() {
            return Err(CliError::invalid(
                pred_path,
                Error::Input(format!("sentence {} differs from the gold text", i + 1)),
            ));
        }
    }
    let trees: Vec<WordTree> = pred.trees().cloned().collect();
    evaluate_corpus(&gold, &trees).map_err(|e| CliError::invalid(pred_path, e))
}

pub fn eval(gold: &Path, pred: &Path) -> Result<()> {
    let report = compare(gold, pred)?;
    print!("{}", to_json(&report.to_json()));
    Ok(())
}

pub fn analyze(gold: &Path, pred: &Path) -> Result<()> {
    let r = compare(gold, pred)?;
    let c = &r.counts;
    let out = json!({
        "pred_words": c.pred_words,
        "correct": c.correct_udep,
        "seg_wrong": c.seg_wrong,
        "head_wrong": c.head_wrong,
        "correct_pct": r.breakdown.correct_pct,
        "seg_wrong_pct": r.breakdown.seg_wrong_pct,
        "head_wrong_pct": r.breakdown.head_wrong_pct,
    });
    print!("{}", to_json(&out));
    Ok(())
}
