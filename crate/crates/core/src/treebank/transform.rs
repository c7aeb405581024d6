use std::fmt;

use super::{find_cycle, CharTree, Sentence, Span, WordTree, APP, SEG};
use crate::error::{Error, Result};

/// Lowers a word tree to its character tree: every non-final character of
/// a word points at its right neighbour with [`APP`], and each word's last
/// character points at the last character of its head word.
pub fn char_tree_from_word_tree(s: &Sentence, wt: &WordTree) -> Result<CharTree> {
    wt.validate(s.len())?;
    let n = s.len();
    let mut heads = vec![0; n];
    let mut labels = vec![String::new(); n];
    for (w, span) in wt.spans.iter().enumerate() {
        for i in span.start..span.end {
            heads[i - 1] = i + 1;
            labels[i - 1] = APP.to_string();
        }
        let head_word = wt.heads[w];
        heads[span.end - 1] = if head_word == 0 {
            0
        } else {
            wt.spans[head_word - 1].end
        };
        labels[span.end - 1] = wt.labels[w].clone();
    }
    Ok(CharTree { heads, labels })
}

/// Recovers words and word-level arcs from a character tree.
///
/// A maximal run of [`APP`]-labeled characters together with the character
/// that follows it is one word. A word's head is the word containing the
/// head of its last character, and its label is that character's label.
pub fn word_tree_from_char_tree(s: &Sentence, ct: &CharTree) -> Result<WordTree> {
    let n = s.len();
    if ct.heads.len() != n || ct.labels.len() != n {
        return Err(Error::Structure(format!(
            "character tree of {} heads and {} labels for {n} characters",
            ct.heads.len(),
            ct.labels.len()
        )));
    }
    let mut spans = Vec::new();
    let mut word_of = vec![0; n + 1];
    let mut start = 1;
    for i in 1..=n {
        let head = ct.heads[i - 1];
        if head > n {
            return Err(Error::Structure(format!(
                "character {i} has head {head} beyond {n}"
            )));
        }
        word_of[i] = spans.len() + 1;
        if ct.labels[i - 1] == APP {
            if head != i + 1 {
                return Err(Error::AppConstraint {
                    index: i,
                    head,
                    expected: i + 1,
                });
            }
        } else {
            spans.push(Span::new(start, i));
            start = i + 1;
        }
    }
    let mut heads = Vec::with_capacity(spans.len());
    let mut labels = Vec::with_capacity(spans.len());
    for span in &spans {
        let h = ct.heads[span.end - 1];
        heads.push(if h == 0 { 0 } else { word_of[h] });
        labels.push(ct.labels[span.end - 1].clone());
    }
    let wt = WordTree {
        spans,
        heads,
        labels,
    };
    wt.validate(n)?;
    Ok(wt)
}

/// A broken character-tree invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    LengthMismatch { heads: usize, labels: usize },
    HeadOutOfRange { index: usize, head: usize },
    SelfLoop { index: usize },
    NoRoot,
    MultipleRoots(Vec<usize>),
    Cycle(Vec<usize>),
    AppNotAdjacent { index: usize, head: usize },
    AppOnRoot { index: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch { heads, labels } => {
                write!(f, "{heads} heads but {labels} labels")
            }
            Violation::HeadOutOfRange { index, head } => {
                write!(f, "character {index}: head {head} out of range")
            }
            Violation::SelfLoop { index } => write!(f, "character {index} heads itself"),
            Violation::NoRoot => write!(f, "no character attaches to the root"),
            Violation::MultipleRoots(r) => write!(f, "multiple roots at {:?}", r),
            Violation::Cycle(c) => write!(f, "cycle at {:?}", c),
            Violation::AppNotAdjacent { index, head } => write!(
                f,
                "character {index}: {APP:?} arc to {head} is not the right neighbour"
            ),
            Violation::AppOnRoot { index } => {
                write!(f, "character {index}: root arc labeled {APP:?}")
            }
        }
    }
}

/// Lists every broken invariant; empty means the tree is well formed.
pub fn validate_char_tree(ct: &CharTree) -> Vec<Violation> {
    let n = ct.heads.len();
    let mut out = Vec::new();
    if ct.labels.len() != n {
        out.push(Violation::LengthMismatch {
            heads: n,
            labels: ct.labels.len(),
        });
        return out;
    }
    let mut in_range = true;
    for (i, &h) in ct.heads.iter().enumerate() {
        if h > n {
            out.push(Violation::HeadOutOfRange {
                index: i + 1,
                head: h,
            });
            in_range = false;
        } else if h == i + 1 {
            out.push(Violation::SelfLoop { index: i + 1 });
            in_range = false;
        }
    }
    let roots: Vec<usize> = (1..=n).filter(|&i| ct.heads[i - 1] == 0).collect();
    match roots.len() {
        0 => out.push(Violation::NoRoot),
        1 => {}
        _ => out.push(Violation::MultipleRoots(roots)),
    }
    if in_range {
        if let Some(c) = find_cycle(&ct.heads) {
            out.push(Violation::Cycle(c));
        }
    }
    for (i, l) in ct.labels.iter().enumerate() {
        if l != APP {
            continue;
        }
        let h = ct.heads[i];
        if h == 0 {
            out.push(Violation::AppOnRoot { index: i + 1 });
        } else if h != i + 2 {
            out.push(Violation::AppNotAdjacent {
                index: i + 1,
                head: h,
            });
        }
    }
    out
}

/// Turns the boundary labels of a segmentation-only model into word spans.
///
/// Entry `i` labels the arc from character `i + 1` to character `i + 2`;
/// [`SEG`] closes a word after character `i + 1`. The final character
/// always closes a word, so `labels` may have `n - 1` or `n` entries.
pub fn segmentation_from_seg_labels<S: AsRef<str>>(labels: &[S], n: usize) -> Result<Vec<Span>> {
    if n == 0 {
        return Err(Error::Input("segmentation of an empty sentence".into()));
    }
    if labels.len() + 1 != n && labels.len() != n {
        return Err(Error::Input(format!(
            "{} boundary labels for {n} characters",
            labels.len()
        )));
    }
    let mut spans = Vec::new();
    let mut start = 1;
    for (i, l) in labels.iter().enumerate() {
        let boundary = match l.as_ref() {
            SEG => true,
            APP => false,
            other => {
                return Err(Error::Input(format!(
                    "unknown segmentation label {other:?} at position {}",
                    i + 1
                )))
            }
        };
        if boundary && i + 1 < n {
            spans.push(Span::new(start, i + 1));
            start = i + 2;
        }
    }
    spans.push(Span::new(start, n));
    Ok(spans)
}
