//! A deterministic synthetic treebank.
//!
//! Sentences come from a small clause grammar over a fixed lexicon in which
//! every character belongs to exactly one word, so segmentation is
//! recoverable from the characters themselves, and attachment follows
//! from word categories and their order:
//!
//! ```text
//! S  -> NP(nsubj) [ADV(advmod)] V(root) [V(ccomp)] [NP(dobj)] [PUNCT(punct)]
//! NP -> [ADJ(amod)] NOUN
//! ```
//!
//! The object attaches to the last verb; adverb and punctuation attach to
//! the root verb; an adjective attaches to the following noun.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Corpus, Sentence, Span, WordTree, ROOT};

const NOUNS: &[&str] = &[
    "上海",
    "银行",
    "金融业",
    "书",
    "农民",
    "科技馆",
    "城市",
    "水",
    "森林",
    "图画",
    "电脑",
    "工程师",
];
const VERBS: &[&str] = &["计划", "看", "发展", "支持", "建设", "买", "写", "跑"];
const ADJECTIVES: &[&str] = &["新", "美丽", "重要", "大"];
const ADVERBS: &[&str] = &["也", "已经", "正在"];
const PUNCTUATION: &[&str] = &["。", "！"];

/// Number of distinct characters in the synthetic lexicon.
pub const SYNTH_VOCABULARY_SIZE: usize = 50;

const MIN_CHARS: usize = 5;
const MAX_CHARS: usize = 15;

fn pick<'a, R: Rng>(rng: &mut R, words: &[&'a str]) -> &'a str {
    words[rng.random_range(0..words.len())]
}

struct Builder {
    words: Vec<&'static str>,
    heads: Vec<usize>,
    labels: Vec<&'static str>,
}

impl Builder {
    /// Appends a word and returns its 1-based index. Heads are patched
    /// once the attachment target exists.
    fn push(&mut self, word: &'static str, label: &'static str) -> usize {
        self.words.push(word);
        self.heads.push(0);
        self.labels.push(label);
        self.words.len()
    }

    /// Appends `[ADJ] NOUN` and returns the noun's index.
    fn noun_phrase<R: Rng>(&mut self, rng: &mut R, label: &'static str) -> usize {
        let adj = rng
            .random_bool(0.4)
            .then(|| self.push(pick(rng, ADJECTIVES), "amod"));
        let noun = self.push(pick(rng, NOUNS), label);
        if let Some(a) = adj {
            self.heads[a - 1] = noun;
        }
        noun
    }

    fn char_len(&self) -> usize {
        self.words.iter().map(|w| w.chars().count()).sum()
    }
}

fn clause<R: Rng>(rng: &mut R) -> Builder {
    let mut b = Builder {
        words: Vec::new(),
        heads: Vec::new(),
        labels: Vec::new(),
    };
    let subject = b.noun_phrase(rng, "nsubj");
    let adverb = rng
        .random_bool(0.3)
        .then(|| b.push(pick(rng, ADVERBS), "advmod"));
    let verb = b.push(pick(rng, VERBS), ROOT);
    b.heads[subject - 1] = verb;
    if let Some(a) = adverb {
        b.heads[a - 1] = verb;
    }
    let mut last_verb = verb;
    if rng.random_bool(0.3) {
        let comp = b.push(pick(rng, VERBS), "ccomp");
        b.heads[comp - 1] = verb;
        last_verb = comp;
    }
    if rng.random_bool(0.7) {
        let object = b.noun_phrase(rng, "dobj");
        b.heads[object - 1] = last_verb;
    }
    if rng.random_bool(0.5) {
        let p = b.push(pick(rng, PUNCTUATION), "punct");
        b.heads[p - 1] = verb;
    }
    b
}

/// Generates `n_sentences` sentences of 5 to 15 characters. The output
/// depends only on `seed`.
pub fn gen_synth_corpus(seed: u64, n_sentences: usize) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(n_sentences);
    while items.len() < n_sentences {
        let b = clause(&mut rng);
        if !(MIN_CHARS..=MAX_CHARS).contains(&b.char_len()) {
            continue;
        }
        let text: String = b.words.concat();
        let lengths: Vec<usize> = b.words.iter().map(|w| w.chars().count()).collect();
        let labels = b.labels.iter().map(|l| l.to_string()).collect();
        let tree =
            WordTree::from_lengths(&lengths, b.heads, labels).expect("grammar yields valid trees");
        items.push((Sentence::new(&text).expect("non-empty"), tree));
    }
    Corpus::new(items).expect("grammar yields a valid corpus")
}

/// `n_train + n_dev` sentences from one seeded stream, split in order.
pub fn synth_split(seed: u64, n_train: usize, n_dev: usize) -> (Corpus, Corpus) {
    let mut items = gen_synth_corpus(seed, n_train + n_dev).items;
    let dev = items.split_off(n_train);
    (
        Corpus::new(items).expect("valid corpus"),
        Corpus::new(dev).expect("valid corpus"),
    )
}

/// A random sentence with a random (possibly non-projective) word tree of
/// at most `max_chars` characters, for fuzzing.
pub fn random_word_tree<R: Rng>(
    rng: &mut R,
    max_chars: usize,
    labels: &[&str],
) -> (Sentence, WordTree) {
    const ALPHABET: &[char] = &['甲', '乙', '丙', '丁', '戊', '己', '庚', '辛'];
    let n = rng.random_range(1..=max_chars.max(1));
    let mut spans = Vec::new();
    let mut start = 1;
    while start <= n {
        let len = rng.random_range(1..=4).min(n + 1 - start);
        spans.push(Span::new(start, start + len - 1));
        start += len;
    }
    let m = spans.len();
    let mut order: Vec<usize> = (1..=m).collect();
    for i in (1..m).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut heads = vec![0; m];
    for k in 1..m {
        heads[order[k] - 1] = order[rng.random_range(0..k)];
    }
    let labels = (0..m)
        .map(|w| {
            if heads[w] == 0 {
                ROOT.to_string()
            } else {
                labels[rng.random_range(0..labels.len())].to_string()
            }
        })
        .collect();
    let chars = (0..n)
        .map(|_| ALPHABET[rng.random_range(0..ALPHABET.len())])
        .collect();
    let tree = WordTree::new(spans, heads, labels).expect("random tree is valid");
    (Sentence::from_chars(chars).expect("non-empty"), tree)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::treebank::write_corpus;

    #[test]
    fn lexicon_uses_fifty_distinct_characters() {
        let all: Vec<char> = [NOUNS, VERBS, ADJECTIVES, ADVERBS, PUNCTUATION]
            .iter()
            .flat_map(|ws| ws.iter().flat_map(|w| w.chars()))
            .collect();
        let distinct: BTreeSet<char> = all.iter().copied().collect();
        assert_eq!(all.len(), SYNTH_VOCABULARY_SIZE);
        assert_eq!(distinct.len(), SYNTH_VOCABULARY_SIZE);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = write_corpus(&gen_synth_corpus(1, 3));
        let b = write_corpus(&gen_synth_corpus(1, 3));
        assert_eq!(a, b);
        assert_ne!(a, write_corpus(&gen_synth_corpus(2, 3)));
    }

    #[test]
    fn lengths_and_labels() {
        let c = gen_synth_corpus(1, 2000);
        assert_eq!(c.len(), 2000);
        assert!(c
            .sentences()
            .all(|s| (MIN_CHARS..=MAX_CHARS).contains(&s.len())));
        // six attachment labels plus root, plus app
        assert_eq!(c.label_set.len(), 8);
    }
}
