use joint_cws::tensor::Tensor;
use joint_cws::treebank::{Sentence, Span, WordTree};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const LABELS: &[&str] = &["nsubj", "dobj", "amod"];

#[allow(dead_code)]
pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<f64> {
    let data = (0..rows * cols)
        .map(|_| rng.random_range(-5.0..5.0))
        .collect();
    Tensor::new(vec![rows, cols], data).unwrap()
}

pub fn is_single_rooted_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().filter(|&&h| h == 0).count() != 1 {
        return false;
    }
    (1..=n).all(|start| {
        let mut v = start;
        for _ in 0..=n {
            if v == 0 {
                return true;
            }
            v = heads[v - 1];
        }
        false
    })
}

/// Perturbs a gold tree: re-segments a few spots and rewires some heads.
pub fn perturb(rng: &mut ChaCha8Rng, s: &Sentence, gold: &WordTree) -> WordTree {
    let n = s.len();
    let mut cuts: Vec<bool> = (1..n)
        .map(|i| gold.spans.iter().any(|sp| sp.end == i))
        .collect();
    for c in cuts.iter_mut() {
        if rng.random_bool(0.15) {
            *c = !*c;
        }
    }
    let mut spans = Vec::new();
    let mut start = 1;
    for (i, &c) in cuts.iter().enumerate() {
        if c {
            spans.push(Span::new(start, i + 1));
            start = i + 2;
        }
    }
    spans.push(Span::new(start, n));
    let m = spans.len();
    // random tree over the new words, biased towards the gold heads
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
                "root".to_string()
            } else {
                LABELS[rng.random_range(0..LABELS.len())].to_string()
            }
        })
        .collect();
    let mut pred = WordTree::new(spans, heads, labels).unwrap();
    if pred.spans == gold.spans && rng.random_bool(0.5) {
        pred = gold.clone();
        let w = rng.random_range(0..m);
        if pred.heads[w] != 0 {
            pred.labels[w] = LABELS[rng.random_range(0..LABELS.len())].to_string();
        }
    }
    pred
}
