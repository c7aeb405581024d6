//! Loss, optimizer and the epoch loop.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::decoder::{parse_batch, DecodeConfig};
use crate::dropout::{Dropout, DropoutRates};
use crate::encoder::{build_vocab, Pretrained};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_corpus, EvalReport};
use crate::model::{Mode, ModelConfig, ModelParams};
use crate::tensor::{FlushToZero, Grads, Graph, ParamStore, Real, Tensor, Var};
use crate::treebank::{Corpus, Sentence, WordTree};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr0: f64,
    pub anneal_base: f64,
    pub anneal_period: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global gradient-norm bound.
    pub clip: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a dev improvement; 0 never stops early.
    pub patience: usize,
    pub dropout: DropoutRates,
    pub seed: u64,
    /// Minimum count for an n-gram to get its own embedding row.
    pub min_freq: usize,
    /// Sentences per independent forward/backward pass within a batch.
    /// Passes run in parallel and their gradients are summed in order.
    pub grad_chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr0: 2e-3,
            anneal_base: 0.75,
            anneal_period: 5000.0,
            beta1: 0.9,
            beta2: 0.9,
            epsilon: 1e-8,
            clip: 5.0,
            batch_size: 32,
            max_epochs: 50,
            patience: 0,
            dropout: DropoutRates::default(),
            seed: 1,
            min_freq: 2,
            grad_chunk: 32,
        }
    }
}

impl TrainConfig {
    /// Batch 128 for up to 100 epochs.
    pub fn full() -> Self {
        TrainConfig {
            batch_size: 128,
            max_epochs: 100,
            grad_chunk: 128,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lr0", self.lr0),
            ("anneal_base", self.anneal_base),
            ("anneal_period", self.anneal_period),
            ("epsilon", self.epsilon),
            ("clip", self.clip),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        let rates = self.dropout;
        for (name, v) in [
            ("embedding dropout", rates.embedding),
            ("lstm dropout", rates.lstm),
            ("arc_mlp dropout", rates.arc_mlp),
            ("label_mlp dropout", rates.label_mlp),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must be in [0, 1), got {v}")));
            }
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("min_freq", self.min_freq),
            ("grad_chunk", self.grad_chunk),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Learning rate after `t` updates: `lr0 · base^(t / period)`.
    pub fn lr_at(&self, t: u64) -> f64 {
        self.lr0 * self.anneal_base.powf(t as f64 / self.anneal_period)
    }
}

/// `2e-3 · 0.75^(t/5000)`.
pub fn lr_at(t: u64) -> f64 {
    TrainConfig::default().lr_at(t)
}

/// A sentence with its targets in the model's label space. For joint
/// models `heads`/`labels` describe every character; for the
/// segmentation-only model `labels` holds the `n-1` boundary labels.
#[derive(Clone, Debug)]
pub struct Example {
    pub sentence: Sentence,
    pub heads: Vec<usize>,
    pub labels: Vec<usize>,
}

pub fn prepare<T: Real>(m: &ModelParams<T>, corpus: &Corpus) -> Result<Vec<Example>> {
    corpus
        .items
        .iter()
        .map(|(s, wt)| {
            if m.config.mode == Mode::SegOnly {
                return Ok(Example {
                    sentence: s.clone(),
                    heads: Vec::new(),
                    labels: m.gold_boundaries(wt),
                });
            }
            let ct = m.gold_char_tree(s, wt)?;
            let labels = ct
                .labels
                .iter()
                .map(|l| {
                    m.labels
                        .index(l)
                        .ok_or_else(|| Error::Input(format!("label {l:?} unseen in training")))
                })
                .collect::<Result<_>>()?;
            Ok(Example {
                sentence: s.clone(),
                heads: ct.heads,
                labels,
            })
        })
        .collect()
}

/// Summed arc and label cross-entropy over `batch`, divided by `tokens`.
pub fn joint_loss<T: Real>(
    g: &mut Graph<T>,
    m: &ModelParams<T>,
    batch: &[&Example],
    tokens: usize,
    dropout: &mut Dropout,
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::Input("empty batch".into()));
    }
    if tokens == 0 {
        return Err(Error::Input("token count must be positive".into()));
    }
    let sentences: Vec<&Sentence> = batch.iter().map(|e| &e.sentence).collect();
    let hidden = m.hidden(g, &sentences, dropout)?;
    let mut terms = Vec::new();
    let mut arcs = Vec::new();
    let mut gold = Vec::new();
    if m.config.mode == Mode::SegOnly {
        for (b, e) in batch.iter().enumerate() {
            for i in 1..e.sentence.len() {
                arcs.push((b, i, i + 1));
                gold.push(Some(e.labels[i - 1]));
            }
        }
    } else {
        for (b, e) in batch.iter().enumerate() {
            let a = m.arc_scores(g, &hidden, b)?;
            let by_dependent = g.transpose(a)?;
            let targets: Vec<Option<usize>> = e.heads.iter().map(|&h| Some(h)).collect();
            terms.push(g.cross_entropy(by_dependent, &targets)?);
            for (j, (&h, &l)) in e.heads.iter().zip(&e.labels).enumerate() {
                arcs.push((b, j + 1, h));
                gold.push(Some(l));
            }
        }
    }
    if !arcs.is_empty() {
        let l = m.label_scores(g, &hidden, &arcs)?;
        terms.push(g.cross_entropy(l, &gold)?);
    }
    let total = if terms.is_empty() {
        g.constant(Tensor::scalar(T::zero()))
    } else {
        g.add_n(&terms)?
    };
    Ok(g.scale(total, T::lit(1.0 / tokens as f64)))
}

/// Adam moments and the update counter.
#[derive(Clone, Debug)]
pub struct OptimState<T> {
    pub m: Grads<T>,
    pub v: Grads<T>,
    pub t: u64,
}

impl<T: Real> OptimState<T> {
    pub fn new(store: &ParamStore<T>) -> Self {
        OptimState {
            m: Grads::zeros_like(store),
            v: Grads::zeros_like(store),
            t: 0,
        }
    }
}

/// Clips `grads` to the configured global norm, then applies one
/// bias-corrected Adam update at `lr_at(t)`. Returns the norm before
/// clipping.
pub fn adam_step<T: Real>(
    store: &mut ParamStore<T>,
    grads: &mut Grads<T>,
    st: &mut OptimState<T>,
    cfg: &TrainConfig,
) -> Result<f64> {
    if !grads.all_finite() {
        return Err(Error::Divergence(format!(
            "non-finite gradient at update {}",
            st.t + 1
        )));
    }
    let norm = grads.global_norm();
    if norm > cfg.clip {
        grads.scale(T::lit(cfg.clip / norm));
    }
    let lr = cfg.lr_at(st.t);
    st.t += 1;
    let c1 = 1.0 - cfg.beta1.powi(st.t as i32);
    let c2 = 1.0 - cfg.beta2.powi(st.t as i32);
    let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
    let (one, eps) = (T::one(), T::lit(cfg.epsilon));
    let step = T::lit(lr / c1);
    let c2_sqrt = T::lit(c2.sqrt());
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let g = grads.get(id);
        let m = st.m.get_mut(id);
        let v = st.v.get_mut(id);
        let p = store.get_mut(id).data_mut();
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            // lr · m̂ / (√v̂ + ε) with the corrections folded in
            p[i] -= step * m[i] / (v[i].sqrt() / c2_sqrt + eps);
        }
    }
    Ok(norm)
}

/// One epoch's summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    /// Training loss per token, averaged over the epoch.
    pub loss: f64,
    pub dev_seg_f1: f64,
    pub dev_udep_f1: f64,
    pub dev_ldep_f1: f64,
}

impl EpochRecord {
    pub fn log_line(&self) -> String {
        format!(
            "epoch {:>3}  steps {:>6}  loss {:.6}  dev seg {:.4}  udep {:.4}  ldep {:.4}",
            self.epoch, self.steps, self.loss, self.dev_seg_f1, self.dev_udep_f1, self.dev_ldep_f1
        )
    }
}

pub struct TrainOutcome<T> {
    pub best: ModelParams<T>,
    pub best_epoch: usize,
    pub best_report: EvalReport,
    pub epochs: Vec<EpochRecord>,
}

/// Builds an untrained model whose vocabulary and labels come from `train`.
pub fn init_model<T: Real>(
    config: ModelConfig,
    cfg: &TrainConfig,
    train: &Corpus,
    pretrained: [Option<Pretrained<T>>; 3],
) -> Result<ModelParams<T>> {
    let vocab = build_vocab(train, cfg.min_freq)?;
    let labels = config.mode.label_set(train)?;
    ModelParams::new(config, vocab, labels, pretrained, cfg.seed)
}

/// Parses `corpus` with `m` and scores the result.
pub fn evaluate_model<T: Real>(m: &ModelParams<T>, corpus: &Corpus) -> Result<EvalReport> {
    let sentences: Vec<&Sentence> = corpus.sentences().collect();
    let parsed = parse_batch(&sentences, m, DecodeConfig::new(m.config.mode))?;
    let pred: Vec<WordTree> = parsed.into_iter().map(|(wt, _)| wt).collect();
    evaluate_corpus(corpus, &pred)
}

/// Length-bucketed batches in a seeded random order: sentences are sorted
/// by length with random tie order, cut into batches, and the batches are
/// shuffled.
pub fn make_batches<R: Rng>(lengths: &[usize], batch_size: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.shuffle(rng);
    order.sort_by_key(|&i| lengths[i]);
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    batches.shuffle(rng);
    batches
}

/// Forward and backward over one batch; gradients are accumulated into
/// `grads` and the summed loss is returned.
fn batch_gradients<T: Real>(
    m: &ModelParams<T>,
    batch: &[&Example],
    chunk: usize,
    seeds: &[u64],
    rates: DropoutRates,
    grads: &mut Grads<T>,
) -> Result<f64> {
    let tokens: usize = batch.iter().map(|e| e.sentence.len()).sum();
    let parts: Vec<Result<(f64, Grads<T>)>> = batch
        .par_chunks(chunk)
        .zip(seeds.par_iter())
        .map(|(part, &seed)| {
            let _ftz = FlushToZero::enable();
            let mut g = Graph::new(&m.store);
            let mut dropout = Dropout::train(rates, seed);
            let loss = joint_loss(&mut g, m, part, tokens, &mut dropout)?;
            let mut local = Grads::zeros_like(&m.store);
            g.backward(loss, &mut local)?;
            Ok((g.scalar(loss).as_f64(), local))
        })
        .collect();
    let mut total = 0.0;
    for p in parts {
        let (loss, local) = p?;
        total += loss;
        grads.add_assign(&local);
    }
    Ok(total)
}

/// Trains `model` on `train`, selecting the epoch with the best dev
/// F1_udep (earliest on ties). `on_epoch` sees every epoch's record and
/// model, for logging and checkpointing.
pub fn train<T, F>(
    model: ModelParams<T>,
    cfg: &TrainConfig,
    train: &Corpus,
    dev: &Corpus,
    mut on_epoch: F,
) -> Result<TrainOutcome<T>>
where
    T: Real,
    F: FnMut(&EpochRecord, &ModelParams<T>) -> Result<()>,
{
    cfg.validate()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Input(
            "training and dev corpora must be non-empty".into(),
        ));
    }
    let examples = prepare(&model, train)?;
    let lengths: Vec<usize> = examples.iter().map(|e| e.sentence.len()).collect();
    let mut model = model;
    let mut state = OptimState::new(&model.store);
    let mut grads = Grads::zeros_like(&model.store);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(f64, usize, ModelParams<T>, EvalReport)> = None;
    let mut epochs = Vec::new();
    let mut stale = 0;
    let _ftz = FlushToZero::enable();

    for epoch in 1..=cfg.max_epochs {
        let batches = make_batches(&lengths, cfg.batch_size, &mut rng);
        let mut loss_sum = 0.0;
        for ids in &batches {
            let batch: Vec<&Example> = ids.iter().map(|&i| &examples[i]).collect();
            let n_chunks = batch.len().div_ceil(cfg.grad_chunk);
            let seeds: Vec<u64> = (0..n_chunks).map(|_| rng.random()).collect();
            grads.zero();
            let loss = batch_gradients(
                &model,
                &batch,
                cfg.grad_chunk,
                &seeds,
                cfg.dropout,
                &mut grads,
            )?;
            if !loss.is_finite() {
                return Err(Error::Divergence(format!(
                    "loss became {loss} at update {} (epoch {epoch})",
                    state.t + 1
                )));
            }
            let tokens: usize = batch.iter().map(|e| e.sentence.len()).sum();
            loss_sum += loss * tokens as f64;
            adam_step(&mut model.store, &mut grads, &mut state, cfg)?;
        }
        let report = evaluate_model(&model, dev)?;
        let record = EpochRecord {
            epoch,
            steps: state.t,
            loss: loss_sum / lengths.iter().sum::<usize>() as f64,
            dev_seg_f1: report.seg.f1,
            dev_udep_f1: report.udep.f1,
            dev_ldep_f1: report.ldep.f1,
        };
        on_epoch(&record, &model)?;
        epochs.push(record);
        if best.as_ref().is_none_or(|b| report.udep.f1 > b.0) {
            best = Some((report.udep.f1, epoch, model.clone(), report));
            stale = 0;
        } else {
            stale += 1;
            if cfg.patience > 0 && stale >= cfg.patience {
                break;
            }
        }
    }
    let (_, best_epoch, best, best_report) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        best,
        best_epoch,
        best_report,
        epochs,
    })
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to rerun a training job and check its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub train_corpus_sha256: String,
    pub dev_corpus_sha256: String,
    pub pretrained_sha256: Vec<Option<String>>,
    pub best_epoch: usize,
    pub epochs: Vec<EpochRecord>,
}
