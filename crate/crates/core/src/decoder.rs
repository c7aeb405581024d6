//! From scores to well-formed character trees.

use rayon::prelude::*;

use crate::dropout::Dropout;
use crate::error::{Error, Result};
use crate::model::{Mode, ModelParams, BINARY_DEP};
use crate::tensor::{FlushToZero, Graph, Real, Tensor};
use crate::treebank::{
    char_tree_from_word_tree, find_cycle, segmentation_from_seg_labels, word_tree_from_char_tree,
    CharTree, LabelSet, Sentence, Span, WordTree, ROOT, SEG,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeConfig {
    pub mode: Mode,
    pub enforce_single_root: bool,
}

impl DecodeConfig {
    pub fn new(mode: Mode) -> Self {
        DecodeConfig {
            mode,
            enforce_single_root: true,
        }
    }
}

fn check_arc_matrix<T: Real>(arc: &Tensor<T>) -> Result<usize> {
    let (rows, n) = arc.dims2()?;
    if n == 0 {
        return Err(Error::Input("cannot decode an empty sentence".into()));
    }
    if rows != n + 1 {
        return Err(Error::Dimension(format!(
            "arc scores must be (n+1)×n, got {rows}×{n}"
        )));
    }
    if arc.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::Input("non-finite arc score".into()));
    }
    Ok(n)
}

/// Heads `1..=n` (0 = root) from an `(n+1)×n` matrix whose entry `[h][j-1]`
/// scores head `h` for dependent `j`. Column argmaxes are kept when they
/// already form a tree; otherwise the maximum spanning arborescence wins.
pub fn decode_arcs<T: Real>(arc: &Tensor<T>, single_root: bool) -> Result<Vec<usize>> {
    let n = check_arc_matrix(arc)?;
    if n == 1 {
        return Ok(vec![0]);
    }
    let mut heads = vec![0; n];
    for j in 1..=n {
        let mut best = usize::MAX;
        for h in (0..=n).filter(|&h| h != j) {
            if best == usize::MAX || arc.at(h, j - 1) > arc.at(best, j - 1) {
                best = h;
            }
        }
        heads[j - 1] = best;
    }
    let roots = heads.iter().filter(|&&h| h == 0).count();
    let root_ok = if single_root { roots == 1 } else { roots >= 1 };
    if root_ok && find_cycle(&heads).is_none() {
        return Ok(heads);
    }
    Ok(chu_liu_edmonds(arc, single_root))
}

/// Total score of a head assignment.
pub fn tree_score<T: Real>(arc: &Tensor<T>, heads: &[usize]) -> f64 {
    heads
        .iter()
        .enumerate()
        .map(|(j, &h)| arc.at(h, j).as_f64())
        .sum()
}

/// Maximum spanning arborescence rooted at node 0. With `single_root`,
/// node 0 has exactly one child. Scores must be finite.
pub fn chu_liu_edmonds<T: Real>(arc: &Tensor<T>, single_root: bool) -> Vec<usize> {
    let (_, n) = arc.dims2().expect("matrix");
    if n == 1 {
        return vec![0];
    }
    // square (n+1)×(n+1) matrix with an unused column for the root
    let mut s = vec![vec![f64::NEG_INFINITY; n + 1]; n + 1];
    for (h, row) in s.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate().skip(1) {
            if h != j {
                *x = arc.at(h, j - 1).as_f64();
            }
        }
    }
    let heads = msa(&s);
    if !single_root || heads[1..].iter().filter(|&&h| h == 0).count() == 1 {
        return heads[1..].to_vec();
    }
    // Every root arc pays a penalty larger than the spread of any two
    // trees' scores, so the best tree uses as few root arcs as possible
    // (one) and is the best single-rooted tree.
    let spread: f64 = (1..=n)
        .map(|j| {
            let col = (0..=n).filter(|&h| h != j).map(|h| s[h][j]);
            let hi = col.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = col.fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .sum();
    let penalty = 1.0 + 2.0 * spread;
    for x in s[0].iter_mut().skip(1) {
        *x -= penalty;
    }
    msa(&s)[1..].to_vec()
}

/// Chu-Liu-Edmonds on a dense square matrix `s[head][dep]`; node 0 is the
/// root. Returns heads indexed by node, with `heads[0]` unused.
fn msa(s: &[Vec<f64>]) -> Vec<usize> {
    let size = s.len();
    let mut heads = vec![0; size];
    for v in 1..size {
        let mut best = usize::MAX;
        for u in (0..size).filter(|&u| u != v) {
            if best == usize::MAX || s[u][v] > s[best][v] {
                best = u;
            }
        }
        heads[v] = best;
    }
    let Some(cycle) = find_cycle(&heads[1..]) else {
        return heads;
    };
    let mut in_cycle = vec![false; size];
    for &c in &cycle {
        in_cycle[c] = true;
    }
    let outside: Vec<usize> = (0..size).filter(|&v| !in_cycle[v]).collect();
    let c = outside.len();
    let mut t = vec![vec![f64::NEG_INFINITY; c + 1]; c + 1];
    let mut enter = vec![0; c + 1];
    let mut leave = vec![0; c + 1];
    for (iu, &u) in outside.iter().enumerate() {
        for (iv, &v) in outside.iter().enumerate() {
            t[iu][iv] = s[u][v];
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = cycle[0];
        for &v in &cycle {
            let gain = s[u][v] - s[heads[v]][v];
            if gain > best {
                best = gain;
                arg = v;
            }
        }
        t[iu][c] = best;
        enter[iu] = arg;
    }
    for (iv, &v) in outside.iter().enumerate().skip(1) {
        let mut best = f64::NEG_INFINITY;
        let mut arg = cycle[0];
        for &u in &cycle {
            if s[u][v] > best {
                best = s[u][v];
                arg = u;
            }
        }
        t[c][iv] = best;
        leave[iv] = arg;
    }
    let sub = msa(&t);
    let mut out = heads.clone();
    for (iv, &v) in outside.iter().enumerate().skip(1) {
        out[v] = if sub[iv] == c {
            leave[iv]
        } else {
            outside[sub[iv]]
        };
    }
    let into = sub[c];
    out[enter[into]] = outside[into];
    out
}

/// Label per dependent: argmax of its row in `scores`, lowest index on
/// ties. `app` is only allowed when the head is the right neighbour.
pub fn assign_labels<T: Real>(
    scores: &Tensor<T>,
    heads: &[usize],
    labels: &LabelSet,
) -> Result<Vec<String>> {
    let (rows, k) = scores.dims2()?;
    if rows != heads.len() || k != labels.len() {
        return Err(Error::Dimension(format!(
            "{rows}×{k} label scores for {} arcs and {} labels",
            heads.len(),
            labels.len()
        )));
    }
    let app = labels.app_index();
    let out = heads
        .iter()
        .enumerate()
        .map(|(j, &h)| {
            let allowed = |l: &usize| *l != app || h == j + 2;
            let row = scores.row(j);
            let best = (0..k)
                .filter(allowed)
                .fold(None::<usize>, |best, l| match best {
                    Some(b) if row[b] >= row[l] => Some(b),
                    _ => Some(l),
                })
                .expect("at least one non-app label");
            labels.label(best).to_string()
        })
        .collect();
    Ok(out)
}

/// Boundary labels from an `(n-1)×K` matrix whose row `i` scores the arc
/// from character `i+1` to `i+2`. Only `app` and `seg` compete.
pub fn decode_seg_only<T: Real>(scores: &Tensor<T>, labels: &LabelSet) -> Result<Vec<String>> {
    let seg = labels
        .index(SEG)
        .ok_or_else(|| Error::Config("label set has no seg label".into()))?;
    let app = labels.app_index();
    if scores.is_empty() {
        return Ok(Vec::new());
    }
    let (rows, k) = scores.dims2()?;
    if k != labels.len() {
        return Err(Error::Dimension(format!(
            "{k} score columns for {} labels",
            labels.len()
        )));
    }
    let (first, second) = (seg.min(app), seg.max(app));
    Ok((0..rows)
        .map(|i| {
            let row = scores.row(i);
            let pick = if row[second] > row[first] {
                second
            } else {
                first
            };
            labels.label(pick).to_string()
        })
        .collect())
}

/// Right-branching attachment for a bare segmentation: every word heads
/// to the next one, and the last word is the root.
pub fn naive_attach(spans: Vec<Span>) -> Result<WordTree> {
    let m = spans.len();
    let heads = (1..=m).map(|w| if w == m { 0 } else { w + 1 }).collect();
    let labels = (1..=m)
        .map(|w| if w == m { ROOT } else { BINARY_DEP }.to_string())
        .collect();
    WordTree::new(spans, heads, labels)
}

/// Sentences per forward pass when parsing a batch.
const PARSE_CHUNK: usize = 64;

/// Parses one sentence.
pub fn parse_sentence<T: Real>(
    s: &Sentence,
    m: &ModelParams<T>,
    cfg: DecodeConfig,
) -> Result<(WordTree, CharTree)> {
    let mut out = parse_chunk(&[s], m, cfg)?;
    Ok(out.pop().expect("one result"))
}

/// Parses many sentences, chunked and fanned out across threads. The
/// output order and values do not depend on the thread count.
pub fn parse_batch<T: Real>(
    sentences: &[&Sentence],
    m: &ModelParams<T>,
    cfg: DecodeConfig,
) -> Result<Vec<(WordTree, CharTree)>> {
    let chunks: Vec<Result<Vec<_>>> = sentences
        .par_chunks(PARSE_CHUNK)
        .map(|chunk| parse_chunk(chunk, m, cfg))
        .collect();
    let mut out = Vec::with_capacity(sentences.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

fn parse_chunk<T: Real>(
    sentences: &[&Sentence],
    m: &ModelParams<T>,
    cfg: DecodeConfig,
) -> Result<Vec<(WordTree, CharTree)>> {
    if cfg.mode != m.config.mode {
        return Err(Error::Config(format!(
            "decoding in {} mode with a {} model",
            cfg.mode, m.config.mode
        )));
    }
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let _ftz = FlushToZero::enable();
    let mut g = Graph::new(&m.store);
    let hidden = m.hidden(&mut g, sentences, &mut Dropout::eval())?;
    let k = m.labels.len();

    if cfg.mode == Mode::SegOnly {
        let arcs: Vec<(usize, usize, usize)> = sentences
            .iter()
            .enumerate()
            .flat_map(|(b, s)| (1..s.len()).map(move |i| (b, i, i + 1)))
            .collect();
        let scores = if arcs.is_empty() {
            Tensor::zeros(vec![0, k])
        } else {
            let v = m.label_scores(&mut g, &hidden, &arcs)?;
            g.tensor(v)
        };
        let mut offset = 0;
        return sentences
            .iter()
            .map(|s| {
                let rows = s.len() - 1;
                let block = &scores.data()[offset * k..(offset + rows) * k];
                offset += rows;
                let block = Tensor::new(vec![rows, k], block.to_vec())?;
                let seg = decode_seg_only(&block, &m.labels)?;
                let wt = naive_attach(segmentation_from_seg_labels(&seg, s.len())?)?;
                let ct = char_tree_from_word_tree(s, &wt)?;
                Ok((wt, ct))
            })
            .collect();
    }

    let mut all_heads = Vec::with_capacity(sentences.len());
    for b in 0..sentences.len() {
        let a = m.arc_scores(&mut g, &hidden, b)?;
        all_heads.push(decode_arcs(&g.tensor(a), cfg.enforce_single_root)?);
    }
    let arcs: Vec<(usize, usize, usize)> = all_heads
        .iter()
        .enumerate()
        .flat_map(|(b, hs)| hs.iter().enumerate().map(move |(j, &h)| (b, j + 1, h)))
        .collect();
    let v = m.label_scores(&mut g, &hidden, &arcs)?;
    let scores = g.tensor(v);
    let mut offset = 0;
    sentences
        .iter()
        .zip(all_heads)
        .map(|(s, heads)| {
            let n = s.len();
            let block = Tensor::new(
                vec![n, k],
                scores.data()[offset * k..(offset + n) * k].to_vec(),
            )?;
            offset += n;
            finish_tree(s, heads, &block, &m.labels)
        })
        .collect()
}

/// Labels decoded arcs and recovers the word tree. `label_scores` row
/// `j-1` scores the arc into character `j`.
pub fn finish_tree<T: Real>(
    s: &Sentence,
    heads: Vec<usize>,
    label_scores: &Tensor<T>,
    labels: &LabelSet,
) -> Result<(WordTree, CharTree)> {
    let assigned = assign_labels(label_scores, &heads, labels)?;
    let ct = CharTree::new(heads, assigned);
    let wt = word_tree_from_char_tree(s, &ct)?;
    Ok((wt, ct))
}
