//! Model configuration, parameter layout and the shared forward pass.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dropout::Dropout;
use crate::encoder::{
    BiLstm, BiLstmEncoder, EmbeddingTables, Encoded, Encoder, LstmDirection, Pretrained, Vocabulary,
};
use crate::error::{Error, Result};
use crate::scorer::{
    project, score_arcs, score_labels, ArcScorer, LabelScorer, Mlp, Projections, ScoreSet,
    ScorerParams,
};
use crate::tensor::{restore_checkpoint, Graph, ParamId, ParamStore, Real, Tensor, Var};
use crate::treebank::{
    char_tree_from_word_tree, CharTree, Corpus, LabelSet, Sentence, WordTree, APP, ROOT, SEG,
};

/// Which label space the model predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Full dependency labels plus `app`.
    JointMulti,
    /// `dep`/`root` for word arcs plus `app`.
    JointBinary,
    /// `seg`/`app` on fixed adjacent arcs; no head prediction.
    SegOnly,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::JointMulti => "joint-multi",
            Mode::JointBinary => "joint-binary",
            Mode::SegOnly => "seg-only",
        }
    }

    /// The label inventory this mode predicts, given training data.
    pub fn label_set(self, train: &Corpus) -> Result<LabelSet> {
        match self {
            Mode::JointMulti => Ok(train.label_set.clone()),
            Mode::JointBinary => LabelSet::from_word_labels([BINARY_DEP, ROOT]),
            Mode::SegOnly => LabelSet::from_word_labels([SEG]),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "joint-multi" => Ok(Mode::JointMulti),
            "joint-binary" => Ok(Mode::JointBinary),
            "seg-only" => Ok(Mode::SegOnly),
            other => Err(Error::Config(format!(
                "unknown mode {other:?}; expected joint-multi, joint-binary or seg-only"
            ))),
        }
    }
}

/// Word-arc label of the binary joint model.
pub const BINARY_DEP: &str = "dep";

/// Layer sizes and input features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mode: Mode,
    pub embedding_dim: usize,
    pub lstm_hidden: usize,
    pub lstm_layers: usize,
    pub arc_mlp: usize,
    pub label_mlp: usize,
    /// Add bigram and trigram embeddings to the unigram one.
    pub use_ngrams: bool,
}

impl ModelConfig {
    /// The full-size configuration: 100-dim embeddings, a 3-layer BiLSTM
    /// of 400 units per direction, 500-unit arc and 100-unit label MLPs.
    pub fn full(mode: Mode) -> Self {
        ModelConfig {
            mode,
            embedding_dim: 100,
            lstm_hidden: 400,
            lstm_layers: 3,
            arc_mlp: 500,
            label_mlp: 100,
            use_ngrams: true,
        }
    }

    /// A reduced configuration that trains on a laptop CPU in minutes.
    pub fn desk(mode: Mode) -> Self {
        ModelConfig {
            mode,
            embedding_dim: 32,
            lstm_hidden: 64,
            lstm_layers: 2,
            arc_mlp: 64,
            label_mlp: 32,
            use_ngrams: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("embedding_dim", self.embedding_dim),
            ("lstm_hidden", self.lstm_hidden),
            ("lstm_layers", self.lstm_layers),
            ("arc_mlp", self.arc_mlp),
            ("label_mlp", self.label_mlp),
        ];
        for (name, v) in sizes {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Every trainable tensor, plus the fixed pieces (vocabulary, labels,
/// pre-trained tables) needed to run the model.
#[derive(Clone, Debug)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    pub labels: LabelSet,
    pub store: ParamStore<T>,
    pub encoder: BiLstmEncoder<T>,
    pub scorer: ScorerParams,
}

struct Init<'a, T> {
    store: &'a mut ParamStore<T>,
    rng: ChaCha8Rng,
}

impl<T: Real> Init<'_, T> {
    fn xavier(
        &mut self,
        name: &str,
        shape: Vec<usize>,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<ParamId> {
        let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::lit(normal.sample(&mut self.rng)))
            .collect();
        self.store.add(name, Tensor::new(shape, data)?)
    }

    fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<ParamId> {
        self.xavier(name, vec![rows, cols], rows, cols)
    }

    fn zeros(&mut self, name: &str, shape: Vec<usize>) -> Result<ParamId> {
        self.store.add(name, Tensor::zeros(shape))
    }

    fn mlp(&mut self, prefix: &str, input: usize, output: usize) -> Result<Mlp> {
        Ok(Mlp {
            weight: self.matrix(&format!("{prefix}.weight"), input, output)?,
            bias: self.zeros(&format!("{prefix}.bias"), vec![output])?,
        })
    }
}

/// The fixed parts of a trained model: enough to rebuild it around a
/// checkpoint, given the same pre-trained tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub config: ModelConfig,
    pub labels: Vec<String>,
    pub vocab: Vocabulary,
}

/// Per-batch encoder output and its MLP projections.
#[derive(Clone, Debug)]
pub struct Hidden {
    pub encoded: Encoded,
    pub proj: Projections,
}

impl Hidden {
    /// Row of position `i` (0 = root) of sentence `b` in the stacked states.
    pub fn row(&self, b: usize, i: usize) -> usize {
        self.encoded.offsets[b] + i
    }
}

impl<T: Real> ModelParams<T> {
    /// Allocates and initializes all parameters. Weight matrices are
    /// Xavier-normal, biases zero except the LSTM forget gate (+1).
    pub fn new(
        config: ModelConfig,
        vocab: Vocabulary,
        labels: LabelSet,
        pretrained: [Option<Pretrained<T>>; 3],
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        for p in pretrained.iter().flatten() {
            if p.dim() != config.embedding_dim {
                return Err(Error::Config(format!(
                    "pre-trained vectors have {} components, embedding size is {}",
                    p.dim(),
                    config.embedding_dim
                )));
            }
        }
        let mut store = ParamStore::new();
        let mut init = Init {
            store: &mut store,
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let d = config.embedding_dim;
        let mut learned = vec![init.matrix("emb.unigram", vocab.unigrams.len(), d)?];
        if config.use_ngrams {
            learned.push(init.matrix("emb.bigram", vocab.bigrams.len(), d)?);
            learned.push(init.matrix("emb.trigram", vocab.trigrams.len(), d)?);
        }
        let mut pretrained = pretrained;
        if !config.use_ngrams {
            pretrained[1] = None;
            pretrained[2] = None;
        }
        let embeddings = EmbeddingTables {
            learned,
            pretrained,
            dim: d,
        };

        let h = config.lstm_hidden;
        let mut layers = Vec::with_capacity(config.lstm_layers);
        let mut d_in = embeddings.output_dim();
        for l in 0..config.lstm_layers {
            let mut dir = |name: &str| -> Result<LstmDirection> {
                let prefix = format!("lstm.{l}.{name}");
                let w_input = init.matrix(&format!("{prefix}.w_input"), d_in, 4 * h)?;
                let w_hidden = init.matrix(&format!("{prefix}.w_hidden"), h, 4 * h)?;
                let mut b = Tensor::zeros(vec![4 * h]);
                b.data_mut()[h..2 * h]
                    .iter_mut()
                    .for_each(|x| *x = T::one());
                let bias = init.store.add(format!("{prefix}.bias"), b)?;
                Ok(LstmDirection {
                    w_input,
                    w_hidden,
                    bias,
                })
            };
            layers.push([dir("fwd")?, dir("bwd")?]);
            d_in = 2 * h;
        }
        let lstm = BiLstm {
            layers,
            input_dim: embeddings.output_dim(),
            hidden: h,
        };
        let root = init.zeros("root", vec![2 * h])?;

        let enc = 2 * h;
        let arc = if config.mode == Mode::SegOnly {
            None
        } else {
            let a = config.arc_mlp;
            Some(ArcScorer {
                head_mlp: init.mlp("arc.head_mlp", enc, a)?,
                dep_mlp: init.mlp("arc.dep_mlp", enc, a)?,
                bilinear: init.matrix("arc.bilinear", a, a)?,
                head_bias: init.zeros("arc.head_bias", vec![a])?,
            })
        };
        let p = config.label_mlp;
        let k = labels.len();
        let label = LabelScorer {
            head_mlp: init.mlp("label.head_mlp", enc, p)?,
            dep_mlp: init.mlp("label.dep_mlp", enc, p)?,
            bilinear: init.xavier("label.bilinear", vec![k, p, p], p, p)?,
            linear: init.matrix("label.linear", k, 2 * p)?,
            bias: init.zeros("label.bias", vec![k])?,
        };

        Ok(ModelParams {
            config,
            labels,
            store,
            encoder: BiLstmEncoder {
                vocab,
                embeddings,
                lstm,
                root,
            },
            scorer: ScorerParams { arc, label },
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.encoder.vocab
    }

    pub fn meta(&self) -> ModelMeta {
        ModelMeta {
            config: self.config.clone(),
            labels: self.labels.labels().to_vec(),
            vocab: self.encoder.vocab.clone(),
        }
    }

    /// Rebuilds a model from its metadata and a checkpoint.
    pub fn load<R: Read>(
        meta: ModelMeta,
        pretrained: [Option<Pretrained<T>>; 3],
        checkpoint: R,
    ) -> Result<Self> {
        let labels = LabelSet::from_labels(meta.labels)?;
        let mut m = ModelParams::new(meta.config, meta.vocab, labels, pretrained, 0)?;
        restore_checkpoint(&mut m.store, checkpoint)?;
        Ok(m)
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let e = &self.encoder;
        ModelParams {
            config: self.config.clone(),
            labels: self.labels.clone(),
            store: self.store.cast(),
            encoder: BiLstmEncoder {
                vocab: e.vocab.clone(),
                embeddings: EmbeddingTables {
                    learned: e.embeddings.learned.clone(),
                    pretrained: e
                        .embeddings
                        .pretrained
                        .each_ref()
                        .map(|p| p.as_ref().map(|p| p.cast())),
                    dim: e.embeddings.dim,
                },
                lstm: e.lstm.clone(),
                root: e.root,
            },
            scorer: self.scorer,
        }
    }

    /// Encodes a batch and projects every state through the four MLPs.
    pub fn hidden(
        &self,
        g: &mut Graph<T>,
        sentences: &[&Sentence],
        dropout: &mut Dropout,
    ) -> Result<Hidden> {
        let encoded = self.encoder.encode(g, sentences, dropout)?;
        let proj = project(g, encoded.states, &self.scorer, dropout)?;
        Ok(Hidden { encoded, proj })
    }

    /// `(n+1)×n` arc scores of sentence `b` of the batch.
    pub fn arc_scores(&self, g: &mut Graph<T>, hidden: &Hidden, b: usize) -> Result<Var> {
        let (arc, rh_all, rd_all) =
            match (&self.scorer.arc, hidden.proj.arc_head, hidden.proj.arc_dep) {
                (Some(a), Some(h), Some(d)) => (a, h, d),
                _ => {
                    return Err(Error::Contract(
                        "the segmentation-only model has no arc scorer".into(),
                    ))
                }
            };
        let n = hidden.encoded.lengths[b];
        let start = hidden.row(b, 0);
        let rh = g.slice_rows(rh_all, start, start + n + 1)?;
        let rd = g.slice_rows(rd_all, start + 1, start + n + 1)?;
        let u = g.param(arc.bilinear);
        let ub = g.param(arc.head_bias);
        score_arcs(g, rh, rd, u, ub)
    }

    /// Label scores for `(sentence, dependent, head)` triples, one row each.
    pub fn label_scores(
        &self,
        g: &mut Graph<T>,
        hidden: &Hidden,
        arcs: &[(usize, usize, usize)],
    ) -> Result<Var> {
        let head_rows: Vec<usize> = arcs.iter().map(|&(b, _, h)| hidden.row(b, h)).collect();
        let dep_rows: Vec<usize> = arcs.iter().map(|&(b, d, _)| hidden.row(b, d)).collect();
        let heads = g.gather_rows(hidden.proj.label_head, &head_rows)?;
        let deps = g.gather_rows(hidden.proj.label_dep, &dep_rows)?;
        let l = &self.scorer.label;
        let u = g.param(l.bilinear);
        let w = g.param(l.linear);
        let bias = g.param(l.bias);
        score_labels(g, heads, deps, u, w, bias)
    }

    /// Evaluation-mode scores of one sentence, with label scores for the
    /// given `(dependent, head)` pairs.
    pub fn score_sentence(&self, s: &Sentence, pairs: &[(usize, usize)]) -> Result<ScoreSet<T>> {
        let n = s.len();
        if let Some(&(d, h)) = pairs.iter().find(|&&(d, h)| d == 0 || d > n || h > n) {
            return Err(Error::Index(format!(
                "pair ({d}, {h}) in a {n}-character sentence"
            )));
        }
        let mut g = Graph::new(&self.store);
        let hidden = self.hidden(&mut g, &[s], &mut Dropout::eval())?;
        let arc = match self.scorer.arc {
            Some(_) => {
                let a = self.arc_scores(&mut g, &hidden, 0)?;
                Some(g.tensor(a))
            }
            None => None,
        };
        let labels = if pairs.is_empty() {
            Tensor::zeros(vec![0, self.labels.len()])
        } else {
            let arcs: Vec<_> = pairs.iter().map(|&(d, h)| (0, d, h)).collect();
            let l = self.label_scores(&mut g, &hidden, &arcs)?;
            g.tensor(l)
        };
        Ok(ScoreSet {
            arc,
            pairs: pairs.to_vec(),
            labels,
        })
    }

    /// The full `n×(n+1)×K` label tensor: entry `[j-1][i][k]` scores label
    /// `k` on the arc from head `i` to dependent `j`.
    pub fn label_tensor(&self, s: &Sentence) -> Result<Tensor<T>> {
        let n = s.len();
        let pairs: Vec<(usize, usize)> =
            (1..=n).flat_map(|d| (0..=n).map(move |h| (d, h))).collect();
        let scores = self.score_sentence(s, &pairs)?;
        scores.labels.reshape(vec![n, n + 1, self.labels.len()])
    }

    /// The training target of `wt` in this model's label space.
    pub fn gold_char_tree(&self, s: &Sentence, wt: &WordTree) -> Result<CharTree> {
        let mut ct = char_tree_from_word_tree(s, wt)?;
        if self.config.mode == Mode::JointBinary {
            for (l, &h) in ct.labels.iter_mut().zip(&ct.heads) {
                if l != APP {
                    *l = if h == 0 { ROOT } else { BINARY_DEP }.to_string();
                }
            }
        }
        Ok(ct)
    }

    /// Gold `seg`/`app` indices for the arcs `i ← i+1`, `i = 1..n-1`.
    pub fn gold_boundaries(&self, wt: &WordTree) -> Vec<usize> {
        let n = wt.char_len();
        let app = self.labels.app_index();
        let seg = self.labels.index(SEG).unwrap_or(app);
        let mut out = vec![app; n.saturating_sub(1)];
        for span in &wt.spans {
            if span.end < n {
                out[span.end - 1] = seg;
            }
        }
        out
    }
}
