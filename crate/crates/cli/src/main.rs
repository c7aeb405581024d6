mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use joint_cws::model::Mode;

use crate::config::RunFile;

/// Joint Chinese word segmentation and dependency parsing.
#[derive(Debug, Parser)]
#[command(name = "joint-cws", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic train/dev treebank.
    GenCorpus(GenCorpusArgs),
    /// Train a model and write checkpoints, a log and a run manifest.
    Train(TrainArgs),
    /// Segment and parse raw text, one sentence per line.
    Parse(ParseArgs),
    /// Score predicted trees against gold trees.
    Eval(CompareArgs),
    /// Break predicted words down into correct, seg-wrong and head-wrong.
    Analyze(CompareArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    train_size: usize,
    #[arg(long, default_value_t = 200)]
    dev_size: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// TOML file with run settings; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Output directory for checkpoints, logs and metadata.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    /// desk or full.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    grad_chunk: Option<usize>,
    #[arg(long)]
    pretrained_unigram: Option<PathBuf>,
    #[arg(long)]
    pretrained_bigram: Option<PathBuf>,
    #[arg(long)]
    pretrained_trigram: Option<PathBuf>,
    /// Ignore any pre-trained embedding files.
    #[arg(long)]
    no_pretrained: bool,
    /// Use unigram embeddings only.
    #[arg(long)]
    no_ngram: bool,
}

impl TrainArgs {
    fn into_run_file(self) -> (Option<PathBuf>, RunFile) {
        let flags = RunFile {
            mode: self.mode,
            preset: self.preset,
            train: self.train,
            dev: self.dev,
            out: self.out,
            pretrained_unigram: self.pretrained_unigram,
            pretrained_bigram: self.pretrained_bigram,
            pretrained_trigram: self.pretrained_trigram,
            no_pretrained: self.no_pretrained.then_some(true),
            no_ngram: self.no_ngram.then_some(true),
            seed: self.seed,
            max_epochs: self.max_epochs,
            batch_size: self.batch_size,
            patience: self.patience,
            grad_chunk: self.grad_chunk,
            ..RunFile::default()
        };
        (self.config, flags)
    }
}

#[derive(Debug, Args)]
struct ParseArgs {
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Checkpoint to load instead of the model's best one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
}

fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus(&a.out, a.seed, a.train_size, a.dev_size),
        Command::Train(a) => {
            let (config, flags) = a.into_run_file();
            let mut file = match config {
                Some(p) => RunFile::load(&p)?,
                None => RunFile::default(),
            };
            file.overlay(flags);
            commands::train(&file.resolve()?)
        }
        Command::Parse(a) => commands::parse(
            &a.model,
            a.checkpoint.as_deref(),
            &a.input,
            a.output.as_deref(),
        ),
        Command::Eval(a) => commands::eval(&a.gold, &a.pred),
        Command::Analyze(a) => commands::analyze(&a.gold, &a.pred),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
