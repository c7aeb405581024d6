//! Tab-separated corpus files: one word per line as
//! `WORD<TAB>HEAD<TAB>LABEL`, sentences separated by a blank line. `HEAD`
//! is the 1-based index of the head word, 0 for the root.

use std::fmt::Write as _;

use super::{Corpus, Sentence, Span, WordTree};
use crate::error::{Error, Result};

struct Pending {
    first_line: usize,
    words: Vec<(String, usize, String, usize)>,
}

fn finish(p: Pending) -> Result<(Sentence, WordTree)> {
    let text: String = p.words.iter().map(|(w, ..)| w.as_str()).collect();
    let sentence = Sentence::new(&text).map_err(|e| Error::Parse {
        line: p.first_line,
        message: e.to_string(),
    })?;
    let m = p.words.len();
    let mut spans = Vec::with_capacity(m);
    let mut start = 1;
    for (word, head, _, line) in &p.words {
        if *head > m {
            return Err(Error::Parse {
                line: *line,
                message: format!("head {head} out of range for a {m}-word sentence"),
            });
        }
        let len = word.chars().count();
        spans.push(Span::new(start, start + len - 1));
        start += len;
    }
    let heads = p.words.iter().map(|w| w.1).collect();
    let labels = p.words.iter().map(|w| w.2.clone()).collect();
    let tree = WordTree::new(spans, heads, labels).map_err(|e| {
        Error::Structure(format!("sentence starting at line {}: {e}", p.first_line))
    })?;
    Ok((sentence, tree))
}

pub fn read_corpus(text: &str) -> Result<Corpus> {
    let mut items = Vec::new();
    let mut pending: Option<Pending> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            if let Some(p) = pending.take() {
                items.push(finish(p)?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        if fields.len() != 3 {
            return Err(bad(format!(
                "expected 3 tab-separated fields, got {}",
                fields.len()
            )));
        }
        let word = fields[0];
        if word.is_empty() {
            return Err(bad("empty word".into()));
        }
        let head: usize = fields[1].parse().map_err(|_| {
            bad(format!(
                "head {:?} is not a non-negative integer",
                fields[1]
            ))
        })?;
        let label = fields[2];
        if label.is_empty() {
            return Err(bad("empty label".into()));
        }
        pending
            .get_or_insert_with(|| Pending {
                first_line: line_no,
                words: Vec::new(),
            })
            .words
            .push((word.to_string(), head, label.to_string(), line_no));
    }
    if let Some(p) = pending.take() {
        items.push(finish(p)?);
    }
    Corpus::new(items)
}

pub fn write_corpus(c: &Corpus) -> String {
    let mut out = String::new();
    for (s, t) in &c.items {
        write_tree(&mut out, s, t);
    }
    out
}

pub(crate) fn write_tree(out: &mut String, s: &Sentence, t: &WordTree) {
    for ((span, head), label) in t.spans.iter().zip(&t.heads).zip(&t.labels) {
        writeln!(out, "{}\t{}\t{}", s.span_text(*span), head, label).unwrap();
    }
    out.push('\n');
}
