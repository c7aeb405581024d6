//! Word-level segmentation and dependency scores.
//!
//! Every word contributes one dependent-head pair, the root word's head
//! being the virtual root. A pair is correct only when both its words are
//! segmented exactly as in the gold tree.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::treebank::{Corpus, Span, WordTree};

/// Precision, recall and F1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let p = ratio(correct, predicted);
        let r = ratio(correct, gold);
        let f1 = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        Prf { p, r, f1 }
    }
}

/// Pooled match counts. Predicted words equal predicted pairs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub gold_words: usize,
    pub pred_words: usize,
    pub correct_spans: usize,
    pub correct_udep: usize,
    pub correct_ldep: usize,
    pub seg_wrong: usize,
    pub head_wrong: usize,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.gold_words += o.gold_words;
        self.pred_words += o.pred_words;
        self.correct_spans += o.correct_spans;
        self.correct_udep += o.correct_udep;
        self.correct_ldep += o.correct_ldep;
        self.seg_wrong += o.seg_wrong;
        self.head_wrong += o.head_wrong;
    }
}

/// Shares of predicted pairs that are correct, have a missegmented word,
/// or have well-segmented words but the wrong head.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorBreakdown {
    pub correct_pct: f64,
    pub seg_wrong_pct: f64,
    pub head_wrong_pct: f64,
}

impl ErrorBreakdown {
    fn from_counts(c: &Counts) -> Self {
        let pct = |x: usize| {
            if c.pred_words == 0 {
                0.0
            } else {
                100.0 * x as f64 / c.pred_words as f64
            }
        };
        ErrorBreakdown {
            correct_pct: pct(c.correct_udep),
            seg_wrong_pct: pct(c.seg_wrong),
            head_wrong_pct: pct(c.head_wrong),
        }
    }
}

fn head_span(t: &WordTree, w: usize) -> Option<Span> {
    match t.heads[w] {
        0 => None,
        h => Some(t.spans[h - 1]),
    }
}

/// Per-sentence match counts.
pub fn count(gold: &WordTree, pred: &WordTree) -> Result<Counts> {
    let (gn, pn) = (gold.char_len(), pred.char_len());
    if gn != pn {
        return Err(Error::Input(format!(
            "gold covers {gn} characters, prediction {pn}"
        )));
    }
    let gold_words: HashMap<Span, (Option<Span>, &str)> = (0..gold.len())
        .map(|w| (gold.spans[w], (head_span(gold, w), gold.labels[w].as_str())))
        .collect();
    let mut c = Counts {
        gold_words: gold.len(),
        pred_words: pred.len(),
        ..Counts::default()
    };
    for w in 0..pred.len() {
        let Some(&(gold_head, gold_label)) = gold_words.get(&pred.spans[w]) else {
            c.seg_wrong += 1;
            continue;
        };
        c.correct_spans += 1;
        let head = head_span(pred, w);
        if head.is_some_and(|h| !gold_words.contains_key(&h)) {
            c.seg_wrong += 1;
        } else if head != gold_head {
            c.head_wrong += 1;
        } else {
            c.correct_udep += 1;
            if pred.labels[w] == gold_label {
                c.correct_ldep += 1;
            }
        }
    }
    Ok(c)
}

pub fn seg_scores(gold: &WordTree, pred: &WordTree) -> Result<Prf> {
    let c = count(gold, pred)?;
    Ok(Prf::from_counts(
        c.correct_spans,
        c.pred_words,
        c.gold_words,
    ))
}

pub fn udep_scores(gold: &WordTree, pred: &WordTree) -> Result<Prf> {
    let c = count(gold, pred)?;
    Ok(Prf::from_counts(c.correct_udep, c.pred_words, c.gold_words))
}

pub fn ldep_scores(gold: &WordTree, pred: &WordTree) -> Result<Prf> {
    let c = count(gold, pred)?;
    Ok(Prf::from_counts(c.correct_ldep, c.pred_words, c.gold_words))
}

pub fn error_breakdown(gold: &WordTree, pred: &WordTree) -> Result<ErrorBreakdown> {
    Ok(ErrorBreakdown::from_counts(&count(gold, pred)?))
}

/// Corpus-level scores from pooled counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub seg: Prf,
    pub udep: Prf,
    pub ldep: Prf,
    pub counts: Counts,
    pub breakdown: ErrorBreakdown,
}

impl EvalReport {
    pub fn from_counts(c: Counts) -> Self {
        EvalReport {
            seg: Prf::from_counts(c.correct_spans, c.pred_words, c.gold_words),
            udep: Prf::from_counts(c.correct_udep, c.pred_words, c.gold_words),
            ldep: Prf::from_counts(c.correct_ldep, c.pred_words, c.gold_words),
            counts: c,
            breakdown: ErrorBreakdown::from_counts(&c),
        }
    }

    /// Unlabeled attachment score, the recall of unlabeled pairs.
    pub fn uas(&self) -> f64 {
        self.udep.r
    }

    /// Labeled attachment score, the recall of labeled pairs.
    pub fn las(&self) -> f64 {
        self.ldep.r
    }

    /// The flat report printed by the `eval` command.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "seg_p": self.seg.p,
            "seg_r": self.seg.r,
            "seg_f1": self.seg.f1,
            "udep_p": self.udep.p,
            "uas": self.uas(),
            "udep_f1": self.udep.f1,
            "ldep_p": self.ldep.p,
            "las": self.las(),
            "ldep_f1": self.ldep.f1,
            "correct_pct": self.breakdown.correct_pct,
            "seg_wrong_pct": self.breakdown.seg_wrong_pct,
            "head_wrong_pct": self.breakdown.head_wrong_pct,
        })
    }
}

/// Micro-averaged scores of `pred` against the trees of `gold`.
pub fn evaluate_corpus(gold: &Corpus, pred: &[WordTree]) -> Result<EvalReport> {
    if pred.is_empty() {
        return Err(Error::Input("no predicted trees to evaluate".into()));
    }
    if gold.len() != pred.len() {
        return Err(Error::Input(format!(
            "{} gold sentences but {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    let mut total = Counts::default();
    for (i, (g, p)) in gold.trees().zip(pred).enumerate() {
        let c = count(g, p).map_err(|e| Error::Input(format!("sentence {}: {e}", i + 1)))?;
        total.add(&c);
    }
    Ok(EvalReport::from_counts(total))
}
