//! Training run configuration: a flat TOML file whose keys mirror the
//! model and trainer settings, overlaid with command-line flags.

use std::path::{Path, PathBuf};

use joint_cws::dropout::DropoutRates;
use joint_cws::model::{Mode, ModelConfig};
use joint_cws::trainer::TrainConfig;
use serde::Deserialize;

use crate::error::{CliError, Result};

/// Every key is optional; unset keys fall back to the preset.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub mode: Option<Mode>,
    /// `desk` (default) or `full`.
    pub preset: Option<String>,

    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub pretrained_unigram: Option<PathBuf>,
    pub pretrained_bigram: Option<PathBuf>,
    pub pretrained_trigram: Option<PathBuf>,
    pub no_pretrained: Option<bool>,
    pub no_ngram: Option<bool>,

    pub embedding_dim: Option<usize>,
    pub lstm_hidden: Option<usize>,
    pub lstm_layers: Option<usize>,
    pub arc_mlp: Option<usize>,
    pub label_mlp: Option<usize>,

    pub lr0: Option<f64>,
    pub anneal_base: Option<f64>,
    pub anneal_period: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub epsilon: Option<f64>,
    pub clip: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub patience: Option<usize>,
    pub dropout: Option<DropoutRates>,
    pub seed: Option<u64>,
    pub min_freq: Option<usize>,
    pub grad_chunk: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunFile {
    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        let mut f: RunFile = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [
            &mut f.train,
            &mut f.dev,
            &mut f.out,
            &mut f.pretrained_unigram,
            &mut f.pretrained_bigram,
            &mut f.pretrained_trigram,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(f)
    }

    /// Values set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: RunFile) {
        let me = self;
        overlay!(me, other;
            mode, preset, train, dev, out,
            pretrained_unigram, pretrained_bigram, pretrained_trigram,
            no_pretrained, no_ngram,
            embedding_dim, lstm_hidden, lstm_layers, arc_mlp, label_mlp,
            lr0, anneal_base, anneal_period, beta1, beta2, epsilon, clip,
            batch_size, max_epochs, patience, dropout, seed, min_freq, grad_chunk,
        );
    }

    pub fn resolve(self) -> Result<RunSpec> {
        let mode = self.mode.unwrap_or(Mode::JointMulti);
        let (mut model, mut train) = match self.preset.as_deref().unwrap_or("desk") {
            "desk" => (ModelConfig::desk(mode), TrainConfig::default()),
            "full" => (ModelConfig::full(mode), TrainConfig::full()),
            other => {
                return Err(CliError::Config(format!(
                    "unknown preset {other:?}; expected desk or full"
                )))
            }
        };
        macro_rules! set {
            ($dst:ident; $($f:ident),*) => {
                $( if let Some(v) = self.$f { $dst.$f = v; } )*
            };
        }
        set!(model; embedding_dim, lstm_hidden, lstm_layers, arc_mlp, label_mlp);
        set!(train; lr0, anneal_base, anneal_period, beta1, beta2, epsilon, clip,
            batch_size, max_epochs, patience, dropout, seed, min_freq, grad_chunk);
        if self.no_ngram == Some(true) {
            model.use_ngrams = false;
        }
        model
            .validate()
            .and_then(|_| train.validate())
            .map_err(|e| CliError::Config(e.to_string()))?;

        let pretrained = if self.no_pretrained == Some(true) {
            [None, None, None]
        } else {
            [
                self.pretrained_unigram,
                self.pretrained_bigram,
                self.pretrained_trigram,
            ]
        };
        let need = |p: Option<PathBuf>, key: &str| {
            p.ok_or_else(|| CliError::Config(format!("no {key} set in the config or flags")))
        };
        Ok(RunSpec {
            model,
            train,
            train_path: need(self.train, "train")?,
            dev_path: need(self.dev, "dev")?,
            out: need(self.out, "out")?,
            pretrained,
        })
    }
}

/// A fully resolved training run.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_path: PathBuf,
    pub dev_path: PathBuf,
    pub out: PathBuf,
    pub pretrained: [Option<PathBuf>; 3],
}
