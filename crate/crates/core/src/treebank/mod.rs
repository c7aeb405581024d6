//! Sentences, word- and character-level dependency trees, and the
//! transforms between them.
//!
//! Characters are numbered from 1 and index 0 is the virtual root. A word
//! tree attaches words to words; its character-level counterpart attaches
//! each word's last character to the last character of the head word, and
//! chains the remaining characters of a word rightwards with the reserved
//! label [`APP`].

mod io;
mod synth;
mod transform;

pub use io::{read_corpus, write_corpus};
pub use synth::{gen_synth_corpus, random_word_tree, synth_split, SYNTH_VOCABULARY_SIZE};
pub use transform::{
    char_tree_from_word_tree, segmentation_from_seg_labels, validate_char_tree,
    word_tree_from_char_tree, Violation,
};

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label of intra-word arcs.
pub const APP: &str = "app";
/// Label of the arc from the virtual root.
pub const ROOT: &str = "root";
/// Label marking a word boundary in the segmentation-only model.
pub const SEG: &str = "seg";
/// Padding for n-grams running past the end of a sentence.
pub const NGRAM_PAD: &str = "</s>";

/// A non-empty character sequence with its bigram and trigram streams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    chars: Vec<char>,
    bigrams: Vec<String>,
    trigrams: Vec<String>,
}

impl Sentence {
    pub fn new(text: &str) -> Result<Self> {
        Self::from_chars(text.chars().collect())
    }

    pub fn from_chars(chars: Vec<char>) -> Result<Self> {
        if chars.is_empty() {
            return Err(Error::Input("empty sentence".into()));
        }
        let gram = |i: usize, order: usize| -> String {
            (i..i + order)
                .map(|j| match chars.get(j) {
                    Some(c) => c.to_string(),
                    None => NGRAM_PAD.to_string(),
                })
                .collect()
        };
        let bigrams = (0..chars.len()).map(|i| gram(i, 2)).collect();
        let trigrams = (0..chars.len()).map(|i| gram(i, 3)).collect();
        Ok(Sentence {
            chars,
            bigrams,
            trigrams,
        })
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn unigram(&self, i: usize) -> String {
        self.chars[i].to_string()
    }

    pub fn bigrams(&self) -> &[String] {
        &self.bigrams
    }

    pub fn trigrams(&self) -> &[String] {
        &self.trigrams
    }

    pub fn text(&self) -> String {
        self.chars.iter().collect()
    }

    /// Characters of a 1-based inclusive span.
    pub fn span_text(&self, span: Span) -> String {
        self.chars[span.start - 1..span.end].iter().collect()
    }
}

/// A 1-based inclusive character range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.start, self.end)
    }
}

/// Word segmentation plus a labeled word-level dependency tree.
///
/// `heads[w]` is the 1-based index of word `w + 1`'s head, or 0 for the
/// virtual root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordTree {
    pub spans: Vec<Span>,
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
}

impl WordTree {
    pub fn new(spans: Vec<Span>, heads: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let t = WordTree {
            spans,
            heads,
            labels,
        };
        let n = t.spans.last().map_or(0, |s| s.end);
        t.validate(n)?;
        Ok(t)
    }

    /// Builds a tree from consecutive word lengths.
    pub fn from_lengths(lengths: &[usize], heads: Vec<usize>, labels: Vec<String>) -> Result<Self> {
        let mut spans = Vec::with_capacity(lengths.len());
        let mut start = 1;
        for &len in lengths {
            spans.push(Span::new(start, start + len - 1));
            start += len;
        }
        Self::new(spans, heads, labels)
    }

    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn char_len(&self) -> usize {
        self.spans.last().map_or(0, |s| s.end)
    }

    /// Checks every word-tree invariant against a sentence of `n`
    /// characters.
    pub fn validate(&self, n: usize) -> Result<()> {
        let m = self.spans.len();
        if m == 0 {
            return Err(Error::Structure("word tree has no words".into()));
        }
        if self.heads.len() != m || self.labels.len() != m {
            return Err(Error::Structure(format!(
                "{} spans, {} heads, {} labels",
                m,
                self.heads.len(),
                self.labels.len()
            )));
        }
        let mut next = 1;
        for s in &self.spans {
            if s.start != next || s.end < s.start {
                return Err(Error::Structure(format!(
                    "span {s} does not continue the partition at character {next}"
                )));
            }
            next = s.end + 1;
        }
        if next != n + 1 {
            return Err(Error::Structure(format!(
                "spans cover 1..{} but the sentence has {n} characters",
                next - 1
            )));
        }
        for (w, &h) in self.heads.iter().enumerate() {
            if h > m {
                return Err(Error::Structure(format!(
                    "word {} has head {h} beyond {m} words",
                    w + 1
                )));
            }
            if h == w + 1 {
                return Err(Error::Structure(format!("word {} heads itself", w + 1)));
            }
        }
        let roots = self.heads.iter().filter(|&&h| h == 0).count();
        if roots != 1 {
            return Err(Error::Structure(format!(
                "expected exactly one root word, found {roots}"
            )));
        }
        if let Some(cycle) = find_cycle(&self.heads) {
            return Err(Error::Structure(format!("cycle through words {:?}", cycle)));
        }
        if let Some(w) = self.labels.iter().position(|l| l == APP) {
            return Err(Error::Structure(format!(
                "word {} carries the intra-word label {APP:?}",
                w + 1
            )));
        }
        Ok(())
    }
}

/// Per-character heads and labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharTree {
    pub heads: Vec<usize>,
    pub labels: Vec<String>,
}

impl CharTree {
    pub fn new(heads: Vec<usize>, labels: Vec<String>) -> Self {
        CharTree { heads, labels }
    }

    pub fn len(&self) -> usize {
        self.heads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heads.is_empty()
    }
}

/// The ordered arc-label inventory of a model.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    labels: Vec<String>,
    app_index: usize,
    root_index: Option<usize>,
}

impl LabelSet {
    /// Sorted distinct word labels followed by [`APP`].
    pub fn from_word_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let set: BTreeSet<&str> = labels.into_iter().collect();
        if set.contains(APP) {
            return Err(Error::Input(format!(
                "{APP:?} is reserved and cannot be a word label"
            )));
        }
        let mut labels: Vec<String> = set.into_iter().map(str::to_string).collect();
        labels.push(APP.to_string());
        Self::from_labels(labels)
    }

    /// Wraps an explicit ordered inventory, which must hold [`APP`] exactly
    /// once.
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let apps: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| *l == APP)
            .map(|(i, _)| i)
            .collect();
        if apps.len() != 1 {
            return Err(Error::Input(format!(
                "label set must contain {APP:?} exactly once, found {}",
                apps.len()
            )));
        }
        let distinct: BTreeSet<&String> = labels.iter().collect();
        if distinct.len() != labels.len() {
            return Err(Error::Input("duplicate labels".into()));
        }
        let root_index = labels.iter().position(|l| l == ROOT);
        Ok(LabelSet {
            app_index: apps[0],
            root_index,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn app_index(&self) -> usize {
        self.app_index
    }

    pub fn root_index(&self) -> Option<usize> {
        self.root_index
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }
}

/// Sentences paired with gold word trees.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    pub items: Vec<(Sentence, WordTree)>,
    pub label_set: LabelSet,
}

impl Corpus {
    pub fn new(items: Vec<(Sentence, WordTree)>) -> Result<Self> {
        for (i, (s, t)) in items.iter().enumerate() {
            t.validate(s.len())
                .map_err(|e| Error::Structure(format!("sentence {}: {e}", i + 1)))?;
            let joined: String = t.spans.iter().map(|sp| s.span_text(*sp)).collect();
            debug_assert_eq!(joined, s.text());
        }
        let label_set = LabelSet::from_word_labels(
            items
                .iter()
                .flat_map(|(_, t)| t.labels.iter().map(String::as_str)),
        )?;
        Ok(Corpus { items, label_set })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.items.iter().map(|(s, _)| s)
    }

    pub fn trees(&self) -> impl Iterator<Item = &WordTree> {
        self.items.iter().map(|(_, t)| t)
    }

    pub fn token_count(&self) -> usize {
        self.items.iter().map(|(s, _)| s.len()).sum()
    }
}

/// Returns the members of some cycle in a head array (1-based nodes, 0 is
/// the root), if any.
pub(crate) fn find_cycle(heads: &[usize]) -> Option<Vec<usize>> {
    let n = heads.len();
    // 0 = unvisited, 1 = on current path, 2 = done
    let mut state = vec![0u8; n + 1];
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut path = Vec::new();
        let mut v = start;
        while v != 0 && v <= n && state[v] == 0 {
            state[v] = 1;
            path.push(v);
            v = heads[v - 1];
        }
        if v != 0 && v <= n && state[v] == 1 {
            let pos = path.iter().position(|&x| x == v).unwrap();
            let mut cycle = path[pos..].to_vec();
            cycle.sort_unstable();
            return Some(cycle);
        }
        for p in path {
            state[p] = 2;
        }
    }
    None
}

/// Counts of each label, for reporting.
pub fn label_counts(corpus: &Corpus) -> HashMap<String, usize> {
    let mut counts = HashMap::new();
    for t in corpus.trees() {
        for l in &t.labels {
            *counts.entry(l.clone()).or_insert(0) += 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ngram_streams_are_padded() {
        let s = Sentence::new("abc").unwrap();
        assert_eq!(s.bigrams(), &["ab", "bc", "c</s>"]);
        assert_eq!(s.trigrams(), &["abc", "bc</s>", "c</s></s>"]);
        assert!(Sentence::new("").is_err());
    }

    #[test]
    fn word_tree_validation() {
        let ok = WordTree::from_lengths(&[2, 1], vec![0, 1], vec!["root".into(), "obj".into()]);
        assert!(ok.is_ok());
        let two_roots =
            WordTree::from_lengths(&[1, 1], vec![0, 0], vec!["root".into(), "x".into()]);
        assert!(two_roots.is_err());
        let cyclic = WordTree::from_lengths(
            &[1, 1, 1],
            vec![0, 3, 2],
            vec!["root".into(), "x".into(), "x".into()],
        );
        assert!(cyclic.unwrap_err().to_string().contains("cycle"));
        let app = WordTree::from_lengths(&[1, 1], vec![0, 1], vec!["root".into(), "app".into()]);
        assert!(app.is_err());
        let gap = WordTree::new(
            vec![Span::new(1, 1), Span::new(3, 3)],
            vec![0, 1],
            vec!["root".into(), "x".into()],
        );
        assert!(gap.unwrap_err().to_string().contains("(3, 3)"));
    }

    #[test]
    fn label_set_order() {
        let ls = LabelSet::from_word_labels(["nsubj", "root", "dobj", "nsubj"]).unwrap();
        assert_eq!(ls.labels(), &["dobj", "nsubj", "root", "app"]);
        assert_eq!(ls.app_index(), 3);
        assert_eq!(ls.root_index(), Some(2));
        assert!(LabelSet::from_word_labels(["app"]).is_err());
    }

    #[test]
    fn cycle_detection() {
        assert_eq!(find_cycle(&[2, 1]), Some(vec![1, 2]));
        assert_eq!(find_cycle(&[0, 1, 2]), None);
        assert_eq!(find_cycle(&[0, 3, 4, 2]), Some(vec![2, 3, 4]));
    }
}
