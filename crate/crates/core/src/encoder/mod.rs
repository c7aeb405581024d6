//! Character encoders: n-gram embeddings feeding a stacked BiLSTM.

mod embed;
mod lstm;
mod vocab;

pub use embed::{EmbeddingTables, Pretrained};
pub use lstm::{BiLstm, LstmDirection};
pub use vocab::{build_vocab, NgramIndex, Vocabulary, PAD, UNK};

use crate::dropout::Dropout;
use crate::error::Result;
use crate::tensor::{Graph, ParamId, Real, Var};
use crate::treebank::Sentence;

/// Shape of a padded, time-major batch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchLayout {
    pub lengths: Vec<usize>,
    pub max_len: usize,
    pub batch: usize,
}

impl BatchLayout {
    pub fn new(sentences: &[&Sentence]) -> Self {
        let lengths: Vec<usize> = sentences.iter().map(|s| s.len()).collect();
        BatchLayout {
            max_len: lengths.iter().copied().max().unwrap_or(0),
            batch: lengths.len(),
            lengths,
        }
    }

    pub fn rows(&self) -> usize {
        self.max_len * self.batch
    }

    /// Row of character `t` (0-based) of sentence `b`.
    pub fn row(&self, t: usize, b: usize) -> usize {
        t * self.batch + b
    }
}

/// Contextual states for a batch, stacked per sentence. Sentence `b` owns
/// rows `offsets[b] ..= offsets[b] + n_b`; the first of those is the
/// virtual root and the rest are its characters in order.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub states: Var,
    pub offsets: Vec<usize>,
    pub lengths: Vec<usize>,
}

/// Anything that maps sentences to per-character vectors plus a root
/// vector. The BiLSTM stack is the only implementation here; a pretrained
/// transformer would slot in behind the same interface.
pub trait Encoder<T: Real> {
    fn output_dim(&self) -> usize;

    fn encode(
        &self,
        g: &mut Graph<T>,
        sentences: &[&Sentence],
        dropout: &mut Dropout,
    ) -> Result<Encoded>;
}

#[derive(Clone, Debug)]
pub struct BiLstmEncoder<T> {
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingTables<T>,
    pub lstm: BiLstm,
    /// Learned representation of the virtual root.
    pub root: ParamId,
}

impl<T: Real> BiLstmEncoder<T> {
    /// Embeds one sentence: `n × (orders · d_e)`.
    pub fn embed_sentence(
        &self,
        g: &mut Graph<T>,
        s: &Sentence,
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let layout = BatchLayout::new(&[s]);
        self.embeddings
            .embed_batch(g, &self.vocab, &[s], &layout, dropout)
    }
}

impl<T: Real> Encoder<T> for BiLstmEncoder<T> {
    fn output_dim(&self) -> usize {
        self.lstm.output_dim()
    }

    fn encode(
        &self,
        g: &mut Graph<T>,
        sentences: &[&Sentence],
        dropout: &mut Dropout,
    ) -> Result<Encoded> {
        let layout = BatchLayout::new(sentences);
        let x = self
            .embeddings
            .embed_batch(g, &self.vocab, sentences, &layout, dropout)?;
        let h = self.lstm.forward(g, x, &layout, dropout)?;
        let root = g.param(self.root);
        let with_root = g.concat_rows(&[root, h])?;
        let mut rows = Vec::new();
        let mut offsets = Vec::with_capacity(sentences.len());
        for (b, s) in sentences.iter().enumerate() {
            offsets.push(rows.len());
            rows.push(0);
            rows.extend((0..s.len()).map(|t| 1 + layout.row(t, b)));
        }
        let states = g.gather_rows(with_root, &rows)?;
        Ok(Encoded {
            states,
            offsets,
            lengths: layout.lengths,
        })
    }
}
