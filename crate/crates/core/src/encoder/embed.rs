use std::collections::HashMap;

use super::vocab::{Vocabulary, PAD};
use super::BatchLayout;
use crate::dropout::Dropout;
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamId, Real, Tensor, Var};
use crate::treebank::Sentence;

/// Fixed vectors read from a text file, never updated by training.
#[derive(Clone, Debug, PartialEq)]
pub struct Pretrained<T> {
    index: HashMap<String, usize>,
    table: Tensor<T>,
}

impl<T: Real> Pretrained<T> {
    /// Parses `TOKEN v1 .. vD` lines. A leading `COUNT DIM` header line is
    /// skipped. Every vector must have exactly `dim` components.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let mut index = HashMap::new();
        let mut data = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            if fields.len() != dim + 1 {
                return Err(Error::Config(format!(
                    "pre-trained vector on line {} has {} components, embedding size is {dim}",
                    i + 1,
                    fields.len() - 1
                )));
            }
            let token = fields[0].to_string();
            if index.contains_key(&token) {
                continue;
            }
            for f in &fields[1..] {
                let x: f64 = f.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    message: format!("{f:?} is not a number"),
                })?;
                data.push(T::lit(x));
            }
            index.insert(token, index.len());
        }
        let rows = index.len();
        Ok(Pretrained {
            index,
            table: Tensor::new(vec![rows, dim], data)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.table.shape()[1]
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn vector(&self, token: &str) -> Option<&[T]> {
        self.index.get(token).map(|&r| self.table.row(r))
    }

    pub fn table(&self) -> &Tensor<T> {
        &self.table
    }

    pub fn cast<U: Real>(&self) -> Pretrained<U> {
        Pretrained {
            index: self.index.clone(),
            table: self.table.cast(),
        }
    }
}

/// Learned tables per n-gram order (one when n-grams are disabled, else
/// three) and the optional fixed pre-trained tables added to them.
#[derive(Clone, Debug)]
pub struct EmbeddingTables<T> {
    pub learned: Vec<ParamId>,
    pub pretrained: [Option<Pretrained<T>>; 3],
    pub dim: usize,
}

impl<T: Real> EmbeddingTables<T> {
    pub fn orders(&self) -> usize {
        self.learned.len()
    }

    pub fn output_dim(&self) -> usize {
        self.dim * self.orders()
    }

    /// Embeds a padded batch in time-major order: row `t * B + b` holds
    /// character `t` of sentence `b`. Padding rows use the `PAD` entry.
    pub fn embed_batch(
        &self,
        g: &mut Graph<T>,
        vocab: &Vocabulary,
        sentences: &[&Sentence],
        layout: &BatchLayout,
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let lookups: Vec<[Vec<usize>; 3]> = sentences.iter().map(|s| vocab.lookup(s)).collect();
        let mut parts = Vec::with_capacity(self.orders());
        for (order, &table) in self.learned.iter().enumerate() {
            let mut rows = Vec::with_capacity(layout.rows());
            let mut tokens: Vec<Option<String>> = Vec::with_capacity(layout.rows());
            for t in 0..layout.max_len {
                for (b, s) in sentences.iter().enumerate() {
                    if t < s.len() {
                        rows.push(lookups[b][order][t]);
                        tokens.push(Some(ngram(s, order, t)));
                    } else {
                        rows.push(PAD);
                        tokens.push(None);
                    }
                }
            }
            let mut e = g.embedding(table, &rows)?;
            if let Some(pre) = &self.pretrained[order] {
                if pre.dim() != self.dim {
                    return Err(Error::Config(format!(
                        "pre-trained vectors have {} components, embedding size is {}",
                        pre.dim(),
                        self.dim
                    )));
                }
                let mut fixed = Vec::with_capacity(rows.len() * self.dim);
                for tok in &tokens {
                    match tok.as_deref().and_then(|s| pre.vector(s)) {
                        Some(v) => fixed.extend_from_slice(v),
                        None => fixed.extend(std::iter::repeat_n(T::zero(), self.dim)),
                    }
                }
                let c = g.constant(Tensor::new(vec![rows.len(), self.dim], fixed)?);
                e = g.add(e, c)?;
            }
            parts.push(e);
        }
        let x = if parts.len() == 1 {
            parts[0]
        } else {
            g.concat_cols(&parts)?
        };
        let len = g.value(x).len();
        match dropout.mask(dropout.rates().embedding, len) {
            Some(keep) => g.dropout(x, dropout.rates().embedding, &keep),
            None => Ok(x),
        }
    }
}

fn ngram(s: &Sentence, order: usize, t: usize) -> String {
    match order {
        0 => s.unigram(t),
        1 => s.bigrams()[t].clone(),
        _ => s.trigrams()[t].clone(),
    }
}
