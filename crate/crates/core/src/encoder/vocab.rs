use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treebank::{Corpus, Sentence};

pub const UNK: usize = 0;
pub const PAD: usize = 1;

/// A dense string index with reserved `UNK` and `PAD` entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct NgramIndex {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl NgramIndex {
    fn from_items(items: Vec<String>) -> Self {
        let index = items
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, s)| (s.clone(), i))
            .collect();
        NgramIndex { items, index }
    }

    /// Indexes strings seen at least `min_freq` times, most frequent first
    /// and ties in order of first occurrence.
    fn build<'a>(stream: impl Iterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        for (pos, s) in stream.enumerate() {
            counts.entry(s).or_insert((0, pos)).0 += 1;
        }
        let mut kept: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .filter(|(_, (c, _))| *c >= min_freq)
            .map(|(s, (c, first))| (s, c, first))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
        let mut items = vec!["<unk>".to_string(), "<pad>".to_string()];
        items.extend(kept.into_iter().map(|(s, ..)| s.to_string()));
        Self::from_items(items)
    }

    pub fn get(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.len() <= 2
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }
}

impl From<Vec<String>> for NgramIndex {
    fn from(items: Vec<String>) -> Self {
        NgramIndex::from_items(items)
    }
}

impl From<NgramIndex> for Vec<String> {
    fn from(v: NgramIndex) -> Self {
        v.items
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub unigrams: NgramIndex,
    pub bigrams: NgramIndex,
    pub trigrams: NgramIndex,
}

impl Vocabulary {
    /// Index rows for the unigram, bigram and trigram of every character.
    pub fn lookup(&self, s: &Sentence) -> [Vec<usize>; 3] {
        [
            (0..s.len())
                .map(|i| self.unigrams.get(&s.unigram(i)))
                .collect(),
            s.bigrams().iter().map(|b| self.bigrams.get(b)).collect(),
            s.trigrams().iter().map(|t| self.trigrams.get(t)).collect(),
        ]
    }
}

pub fn build_vocab(c: &Corpus, min_freq: usize) -> Result<Vocabulary> {
    if c.is_empty() {
        return Err(Error::Input(
            "cannot build a vocabulary from an empty corpus".into(),
        ));
    }
    if min_freq == 0 {
        return Err(Error::Config("min_freq must be at least 1".into()));
    }
    let unigrams: Vec<String> = c
        .sentences()
        .flat_map(|s| s.chars().iter().map(|ch| ch.to_string()))
        .collect();
    Ok(Vocabulary {
        unigrams: NgramIndex::build(unigrams.iter().map(String::as_str), min_freq),
        bigrams: NgramIndex::build(
            c.sentences()
                .flat_map(|s| s.bigrams().iter().map(String::as_str)),
            min_freq,
        ),
        trigrams: NgramIndex::build(
            c.sentences()
                .flat_map(|s| s.trigrams().iter().map(String::as_str)),
            min_freq,
        ),
    })
}
