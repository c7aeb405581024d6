//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any hard criterion fails. Run with `cargo test --test acceptance`.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::Instant;

use joint_cws::decoder::{
    chu_liu_edmonds, decode_arcs, finish_tree, parse_batch, parse_sentence, tree_score,
    DecodeConfig,
};
use joint_cws::dropout::Dropout;
use joint_cws::encoder::{BatchLayout, BiLstm, LstmDirection};
use joint_cws::metrics::{count, error_breakdown, evaluate_corpus, Prf};
use joint_cws::model::{Mode, ModelConfig, ModelParams};
use joint_cws::scorer::{score_arcs, score_labels};
use joint_cws::tensor::{grad_check, write_checkpoint, Graph, ParamStore, Tensor, Var};
use joint_cws::trainer::{
    evaluate_model, init_model, joint_loss, lr_at, prepare, train, TrainConfig, TrainOutcome,
};
use joint_cws::treebank::{
    char_tree_from_word_tree, random_word_tree, synth_split, validate_char_tree,
    word_tree_from_char_tree, write_corpus, Corpus, LabelSet, Sentence, WordTree, APP,
};
use joint_cws::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::{is_single_rooted_tree, perturb, random_matrix, LABELS};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

// 1 -------------------------------------------------------------------------

fn transform_round_trip() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..1000 {
        let (s, wt) = random_word_tree(&mut rng, 30, LABELS);
        let ok = char_tree_from_word_tree(&s, &wt)
            .and_then(|ct| word_tree_from_char_tree(&s, &ct))
            .is_ok_and(|back| back == wt);
        bad += usize::from(!ok);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad == 0 && secs < 5.0,
        format!("1000 pairs, {bad} mismatches, {secs:.2}s (limit 5s)"),
    )
}

// 2 -------------------------------------------------------------------------

fn figure_fixture() -> Outcome {
    let s = Sentence::new("上海计划发展金融业").unwrap();
    let wt = WordTree::from_lengths(
        &[2, 2, 2, 3],
        vec![2, 0, 2, 3],
        strings(&["nsubj", "root", "ccomp", "dobj"]),
    )
    .unwrap();
    let ct = char_tree_from_word_tree(&s, &wt).unwrap();
    let heads_ok = ct.heads == [2, 4, 4, 0, 6, 4, 8, 9, 6];
    let labels_ok = ct.labels
        == strings(&[
            "app", "nsubj", "app", "root", "app", "ccomp", "app", "app", "dobj",
        ]);
    let inverse_ok = word_tree_from_char_tree(&s, &ct).is_ok_and(|b| b == wt);
    outcome(
        heads_ok && labels_ok && inverse_ok,
        format!("heads {heads_ok}, labels {labels_ok}, inverse {inverse_ok}"),
    )
}

// 3 -------------------------------------------------------------------------

/// Best total over every single-rooted arborescence, by enumeration.
fn brute_force_best(a: &Tensor<f64>, n: usize) -> f64 {
    let mut heads = vec![0usize; n];
    let mut best = f64::NEG_INFINITY;
    loop {
        if heads.iter().enumerate().all(|(j, &h)| h != j + 1) && is_single_rooted_tree(&heads) {
            best = best.max(tree_score(a, &heads));
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            heads[k] += 1;
            if heads[k] <= n {
                break;
            }
            heads[k] = 0;
            k += 1;
        }
    }
}

fn decoder_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut mismatches = 0;
    for n in 2..=6 {
        for _ in 0..200 {
            let a = random_matrix(&mut rng, n + 1, n);
            let cle = chu_liu_edmonds(&a, true);
            let ok = is_single_rooted_tree(&cle)
                && (tree_score(&a, &cle) - brute_force_best(&a, n)).abs() < 1e-9;
            mismatches += usize::from(!ok);
        }
    }
    let mut invalid = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=20);
        let a = random_matrix(&mut rng, n + 1, n);
        let ok = decode_arcs(&a, true).is_ok_and(|h| h.len() == n && is_single_rooted_tree(&h));
        invalid += usize::from(!ok);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && invalid == 0 && secs < 60.0,
        format!(
            "1000 exhaustive comparisons: {mismatches} off; 10^4 fuzzed: {invalid} invalid; {secs:.1}s (limit 60s)"
        ),
    )
}

// 4 -------------------------------------------------------------------------

fn app_constraint_safety() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let labels = LabelSet::from_word_labels(LABELS.iter().copied().chain(["root"])).unwrap();
    let k = labels.len();
    let mut bad_app = 0;
    let mut recovery_errors = 0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=15);
        let s = Sentence::from_chars(vec!['字'; n]).unwrap();
        let heads = decode_arcs(&random_matrix(&mut rng, n + 1, n), true).unwrap();
        let mut scores = random_matrix(&mut rng, n, k);
        // bias towards app to stress the mask
        for j in 0..n {
            if rng.random_bool(0.7) {
                scores.data_mut()[j * k + labels.app_index()] += 10.0;
            }
        }
        match finish_tree(&s, heads, &scores, &labels) {
            Ok((_, ct)) => {
                for (j, (l, &h)) in ct.labels.iter().zip(&ct.heads).enumerate() {
                    if l == APP && h != j + 2 {
                        bad_app += 1;
                    }
                }
                if !validate_char_tree(&ct).is_empty() {
                    recovery_errors += 1;
                }
            }
            Err(_) => recovery_errors += 1,
        }
    }
    // whole-model parses with untrained weights
    let (train_c, _) = synth_split(4, 300, 0);
    let mut model_errors = 0;
    for (i, mode) in [Mode::JointMulti, Mode::JointBinary]
        .into_iter()
        .enumerate()
    {
        let m = init_model::<f32>(
            ModelConfig::desk(mode),
            &TrainConfig {
                seed: i as u64,
                ..TrainConfig::default()
            },
            &train_c,
            [None, None, None],
        )
        .unwrap();
        for s in train_c.sentences() {
            match parse_sentence(s, &m, DecodeConfig::new(mode)) {
                Ok((_, ct)) if validate_char_tree(&ct).is_empty() => {}
                _ => model_errors += 1,
            }
        }
    }
    outcome(
        bad_app == 0 && recovery_errors == 0 && model_errors == 0,
        format!(
            "10^4 fuzzed score sets: {bad_app} illegal app, {recovery_errors} recovery errors; 600 model parses: {model_errors} errors"
        ),
    )
}

// 5 -------------------------------------------------------------------------

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

struct GradTally {
    checks: usize,
    failed: Vec<String>,
    worst: f64,
}

impl GradTally {
    fn run<F>(&mut self, name: &str, store: &ParamStore<f64>, f: F)
    where
        F: Fn(&mut Graph<f64>) -> Result<Var>,
    {
        self.checks += 1;
        match grad_check(store, f, H, TOL) {
            Ok(r) => {
                self.worst = self.worst.max(r.max_rel_error);
                if !r.passed() {
                    self.failed
                        .push(format!("{name} ({:.2e})", r.max_rel_error));
                }
            }
            Err(e) => self.failed.push(format!("{name}: {e}")),
        }
    }
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `sum(y ⊙ w)` for a fixed random `w`, so every output coordinate matters.
fn weighted(g: &mut Graph<f64>, y: Var, seed: u64) -> Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = rand_tensor(&mut rng, g.shape(y).to_vec());
    let w = g.constant(w);
    let p = g.mul(y, w)?;
    Ok(g.sum(p))
}

fn store_of(entries: Vec<(&str, Tensor<f64>)>) -> ParamStore<f64> {
    let mut s = ParamStore::new();
    for (name, t) in entries {
        s.add(name, t).unwrap();
    }
    s
}

fn primitive_checks(t: &mut GradTally, rng: &mut ChaCha8Rng, trial: u64) {
    let (r, c, k) = (
        rng.random_range(1..5),
        rng.random_range(1..5),
        rng.random_range(1..5),
    );
    let a = rand_tensor(rng, vec![r, c]);
    let b = rand_tensor(rng, vec![r, c]);
    let m2 = rand_tensor(rng, vec![c, k]);
    let row = rand_tensor(rng, vec![c]);
    let ab = store_of(vec![("a", a.clone()), ("b", b.clone())]);
    let one = store_of(vec![("a", a.clone())]);
    let s = trial;
    let pa = |g: &mut Graph<f64>| g.param_by_name("a");

    let mm = store_of(vec![("a", a.clone()), ("m", m2)]);
    t.run("matmul", &mm, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("m")?);
        let z = g.matmul(x, y)?;
        weighted(g, z, s)
    });
    t.run("transpose", &one, |g| {
        let x = pa(g)?;
        let z = g.transpose(x)?;
        weighted(g, z, s)
    });
    t.run("reshape", &one, |g| {
        let x = pa(g)?;
        let z = g.reshape(x, vec![c, r])?;
        weighted(g, z, s)
    });
    t.run("add", &ab, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("b")?);
        let z = g.add(x, y)?;
        weighted(g, z, s)
    });
    t.run("mul", &ab, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("b")?);
        let z = g.mul(x, y)?;
        weighted(g, z, s)
    });
    let ar = store_of(vec![("a", a.clone()), ("row", row)]);
    t.run("add_row", &ar, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("row")?);
        let z = g.add_row(x, y)?;
        weighted(g, z, s)
    });
    t.run("scale", &one, |g| {
        let x = pa(g)?;
        let z = g.scale(x, -1.7);
        weighted(g, z, s)
    });
    t.run("tanh", &one, |g| {
        let x = pa(g)?;
        let z = g.tanh(x);
        weighted(g, z, s)
    });
    t.run("sigmoid", &one, |g| {
        let x = pa(g)?;
        let z = g.sigmoid(x);
        weighted(g, z, s)
    });
    t.run("leaky_relu", &one, |g| {
        let x = pa(g)?;
        let z = g.leaky_relu(x, 0.1);
        weighted(g, z, s)
    });
    let keep: Vec<bool> = (0..r * c).map(|_| rng.random_bool(0.6)).collect();
    t.run("dropout", &one, |g| {
        let x = pa(g)?;
        let z = g.dropout(x, 0.3, &keep)?;
        weighted(g, z, s)
    });
    let keep_cols: Vec<bool> = (0..c).map(|_| rng.random_bool(0.6)).collect();
    t.run("dropout_cols", &one, |g| {
        let x = pa(g)?;
        let z = g.dropout_cols(x, 0.3, &keep_cols)?;
        weighted(g, z, s)
    });
    t.run("concat_cols", &ab, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("b")?);
        let z = g.concat_cols(&[x, y, x])?;
        weighted(g, z, s)
    });
    t.run("concat_rows", &ab, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("b")?);
        let z = g.concat_rows(&[y, x])?;
        weighted(g, z, s)
    });
    let (c0, c1) = (rng.random_range(0..c), c);
    t.run("slice_cols", &one, |g| {
        let x = pa(g)?;
        let z = g.slice_cols(x, c0, c1)?;
        weighted(g, z, s)
    });
    let r0 = rng.random_range(0..r);
    t.run("slice_rows", &one, |g| {
        let x = pa(g)?;
        let z = g.slice_rows(x, r0, r)?;
        weighted(g, z, s)
    });
    let picks: Vec<usize> = (0..r + 2).map(|_| rng.random_range(0..r)).collect();
    t.run("gather_rows", &one, |g| {
        let x = pa(g)?;
        let z = g.gather_rows(x, &picks)?;
        weighted(g, z, s)
    });
    let table = store_of(vec![("table", a.clone())]);
    t.run("embedding", &table, |g| {
        let id = g.store().id("table").unwrap();
        let z = g.embedding(id, &picks)?;
        weighted(g, z, s)
    });
    let take: Vec<bool> = (0..r).map(|_| rng.random_bool(0.5)).collect();
    t.run("row_select", &ab, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("b")?);
        let z = g.row_select(x, y, &take)?;
        weighted(g, z, s)
    });
    let targets: Vec<Option<usize>> = (0..r)
        .map(|i| (i % 3 != 2).then(|| rng.random_range(0..c)))
        .collect();
    t.run("cross_entropy", &one, |g| {
        let x = pa(g)?;
        g.cross_entropy(x, &targets)
    });
    t.run("sum", &one, |g| {
        let x = pa(g)?;
        let y = g.tanh(x);
        Ok(g.sum(y))
    });
    t.run("add_n", &ab, |g| {
        let (x, y) = (pa(g)?, g.param_by_name("b")?);
        let z = g.add_n(&[x, y, x])?;
        weighted(g, z, s)
    });
    let lb = store_of(vec![
        ("h", rand_tensor(rng, vec![r, c])),
        ("d", rand_tensor(rng, vec![r, c])),
        ("u", rand_tensor(rng, vec![k, c, c])),
    ]);
    t.run("label_bilinear", &lb, |g| {
        let (h, d, u) = (
            g.param_by_name("h")?,
            g.param_by_name("d")?,
            g.param_by_name("u")?,
        );
        let z = g.label_bilinear(h, d, u)?;
        weighted(g, z, s)
    });
}

fn biaffine_checks(t: &mut GradTally, rng: &mut ChaCha8Rng, trial: u64) {
    let (n, p, k) = (
        rng.random_range(1..6),
        rng.random_range(1..5),
        rng.random_range(1..5),
    );
    let arc = store_of(vec![
        ("rh", rand_tensor(rng, vec![n + 1, p])),
        ("rd", rand_tensor(rng, vec![n, p])),
        ("u", rand_tensor(rng, vec![p, p])),
        ("ub", rand_tensor(rng, vec![p])),
    ]);
    t.run("arc biaffine", &arc, |g| {
        let v: Vec<Var> = ["rh", "rd", "u", "ub"]
            .iter()
            .map(|x| g.param_by_name(x))
            .collect::<Result<_>>()?;
        let z = score_arcs(g, v[0], v[1], v[2], v[3])?;
        weighted(g, z, trial)
    });
    let label = store_of(vec![
        ("h", rand_tensor(rng, vec![n, p])),
        ("d", rand_tensor(rng, vec![n, p])),
        ("u", rand_tensor(rng, vec![k, p, p])),
        ("w", rand_tensor(rng, vec![k, 2 * p])),
        ("b", rand_tensor(rng, vec![k])),
    ]);
    t.run("label biaffine", &label, |g| {
        let v: Vec<Var> = ["h", "d", "u", "w", "b"]
            .iter()
            .map(|x| g.param_by_name(x))
            .collect::<Result<_>>()?;
        let z = score_labels(g, v[0], v[1], v[2], v[3], v[4])?;
        weighted(g, z, trial)
    });
}

fn bilstm_check(t: &mut GradTally, rng: &mut ChaCha8Rng, trial: u64) {
    let d_in = rng.random_range(1..4);
    let hidden = rng.random_range(1..4);
    let layers = 1 + trial as usize % 2;
    let lengths: Vec<usize> = (0..rng.random_range(1..4))
        .map(|_| rng.random_range(1..5))
        .collect();
    let sentences: Vec<Sentence> = lengths
        .iter()
        .map(|&n| Sentence::from_chars(vec!['字'; n]).unwrap())
        .collect();
    let refs: Vec<&Sentence> = sentences.iter().collect();
    let layout = BatchLayout::new(&refs);
    let mut store = ParamStore::new();
    store
        .add("x", rand_tensor(rng, vec![layout.rows(), d_in]))
        .unwrap();
    let mut stack = Vec::new();
    let mut width = d_in;
    for l in 0..layers {
        let mut dir = |name: &str| LstmDirection {
            w_input: store
                .add(
                    format!("{l}.{name}.wi"),
                    rand_tensor(rng, vec![width, 4 * hidden]),
                )
                .unwrap(),
            w_hidden: store
                .add(
                    format!("{l}.{name}.wh"),
                    rand_tensor(rng, vec![hidden, 4 * hidden]),
                )
                .unwrap(),
            bias: store
                .add(format!("{l}.{name}.b"), rand_tensor(rng, vec![4 * hidden]))
                .unwrap(),
        };
        stack.push([dir("fwd"), dir("bwd")]);
        width = 2 * hidden;
    }
    let lstm = BiLstm {
        layers: stack,
        input_dim: d_in,
        hidden,
    };
    // padded rows never reach the loss
    let batch = lengths.len();
    let valid: Vec<usize> = (0..layout.max_len)
        .flat_map(|step| (0..batch).map(move |b| (step, b)))
        .filter(|&(step, b)| step < lengths[b])
        .map(|(step, b)| step * batch + b)
        .collect();
    t.run(&format!("bilstm {layers}x{hidden}"), &store, |g| {
        let x = g.param_by_name("x")?;
        let y = lstm.forward(g, x, &layout, &mut Dropout::eval())?;
        let y = g.gather_rows(y, &valid)?;
        weighted(g, y, trial)
    });
}

fn joint_loss_check(t: &mut GradTally, trial: u64) {
    let mode = [Mode::JointMulti, Mode::JointBinary, Mode::SegOnly][trial as usize % 3];
    let (c, _) = synth_split(50 + trial, 2, 0);
    let config = ModelConfig {
        mode,
        embedding_dim: 2 + trial as usize % 2,
        lstm_hidden: 2,
        lstm_layers: 1 + trial as usize % 2,
        arc_mlp: 3,
        label_mlp: 2,
        use_ngrams: trial.is_multiple_of(2),
    };
    let cfg = TrainConfig {
        min_freq: 1,
        seed: trial,
        ..TrainConfig::default()
    };
    let m64: ModelParams<f64> = init_model(config, &cfg, &c, [None, None, None]).unwrap();
    let mut m64 = m64;
    // zero-initialized biases and root would sit on the leaky-ReLU kink
    let mut rng = ChaCha8Rng::seed_from_u64(trial);
    let ids: Vec<_> = m64.store.ids().collect();
    for id in ids {
        for x in m64.store.get_mut(id).data_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
    }
    let ex = prepare(&m64, &c).unwrap();
    let batch: Vec<_> = ex.iter().collect();
    let tokens = batch.iter().map(|e| e.sentence.len()).sum();
    t.run(&format!("joint_loss {mode}"), &m64.store, |g| {
        joint_loss(g, &m64, &batch, tokens, &mut Dropout::eval())
    });
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut t = GradTally {
        checks: 0,
        failed: Vec::new(),
        worst: 0.0,
    };
    for trial in 0..3 {
        primitive_checks(&mut t, &mut rng, trial);
        biaffine_checks(&mut t, &mut rng, trial);
        bilstm_check(&mut t, &mut rng, trial);
        joint_loss_check(&mut t, trial);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        t.failed.is_empty() && secs < 120.0,
        format!(
            "{} checks, worst relative error {:.2e} (limit 1e-4), {secs:.1}s (limit 120s){}",
            t.checks,
            t.worst,
            if t.failed.is_empty() {
                String::new()
            } else {
                format!("; failed: {}", t.failed.join(", "))
            }
        ),
    )
}

// 6 -------------------------------------------------------------------------

type Pair = ((usize, usize), Option<(usize, usize)>);

fn pairs(t: &WordTree) -> Vec<(Pair, &str)> {
    t.spans
        .iter()
        .zip(&t.heads)
        .zip(&t.labels)
        .map(|((s, &h), l)| {
            let head = (h > 0).then(|| (t.spans[h - 1].start, t.spans[h - 1].end));
            (((s.start, s.end), head), l.as_str())
        })
        .collect()
}

/// Set-based reference: (seg, udep, ldep) correct counts and the three
/// breakdown buckets.
fn reference(gold: &WordTree, pred: &WordTree) -> ([usize; 3], [usize; 3]) {
    let spans = |t: &WordTree| -> HashSet<(usize, usize)> {
        t.spans.iter().map(|s| (s.start, s.end)).collect()
    };
    let (gs, ps) = (spans(gold), spans(pred));
    let gp = pairs(gold);
    let pp = pairs(pred);
    let gu: HashSet<Pair> = gp.iter().map(|(p, _)| *p).collect();
    let pu: HashSet<Pair> = pp.iter().map(|(p, _)| *p).collect();
    let gl: HashSet<(Pair, &str)> = gp.iter().copied().collect();
    let pl: HashSet<(Pair, &str)> = pp.iter().copied().collect();
    let correct = [
        gs.intersection(&ps).count(),
        gu.intersection(&pu).count(),
        gl.intersection(&pl).count(),
    ];
    let mut buckets = [0; 3];
    for (p, _) in &pp {
        let seg_ok = gs.contains(&p.0) && p.1.is_none_or(|h| gs.contains(&h));
        let i = if !seg_ok {
            1
        } else if gu.contains(p) {
            0
        } else {
            2
        };
        buckets[i] += 1;
    }
    (correct, buckets)
}

fn reference_prf(correct: usize, pred: usize, gold: usize) -> Prf {
    let p = if pred == 0 {
        0.0
    } else {
        correct as f64 / pred as f64
    };
    let r = if gold == 0 {
        0.0
    } else {
        correct as f64 / gold as f64
    };
    let f1 = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    Prf { p, r, f1 }
}

fn metric_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut mismatches = 0;
    let mut identity_failures = 0;
    let mut items = Vec::new();
    let mut preds = Vec::new();
    for _ in 0..500 {
        let (s, gold) = random_word_tree(&mut rng, 15, LABELS);
        let pred = perturb(&mut rng, &s, &gold);
        let (correct, buckets) = reference(&gold, &pred);
        let (g, p) = (gold.len(), pred.len());
        let c = count(&gold, &pred).unwrap();
        let b = error_breakdown(&gold, &pred).unwrap();
        let pct = |x: usize| 100.0 * x as f64 / p as f64;
        let same = [c.correct_spans, c.correct_udep, c.correct_ldep] == correct
            && [c.correct_udep, c.seg_wrong, c.head_wrong] == buckets
            && joint_cws::metrics::seg_scores(&gold, &pred).unwrap()
                == reference_prf(correct[0], p, g)
            && joint_cws::metrics::udep_scores(&gold, &pred).unwrap()
                == reference_prf(correct[1], p, g)
            && joint_cws::metrics::ldep_scores(&gold, &pred).unwrap()
                == reference_prf(correct[2], p, g)
            && b.correct_pct == pct(buckets[0])
            && b.seg_wrong_pct == pct(buckets[1])
            && b.head_wrong_pct == pct(buckets[2]);
        mismatches += usize::from(!same);
        let corpus = Corpus::new(vec![(s.clone(), gold.clone())]).unwrap();
        let r = evaluate_corpus(&corpus, std::slice::from_ref(&pred)).unwrap();
        let identities = r.uas() == r.udep.r && r.las() == r.ldep.r && r.ldep.f1 <= r.udep.f1;
        identity_failures += usize::from(!identities);
        items.push((s, gold));
        preds.push(pred);
    }
    let pooled = evaluate_corpus(&Corpus::new(items).unwrap(), &preds).unwrap();
    let pooled_ok = pooled.uas() == pooled.udep.r
        && pooled.las() == pooled.ldep.r
        && pooled.ldep.f1 <= pooled.udep.f1;
    outcome(
        mismatches == 0 && identity_failures == 0 && pooled_ok,
        format!("500 pairs: {mismatches} disagreements with the set reference, {identity_failures} identity violations"),
    )
}

// 7 -------------------------------------------------------------------------

fn schedule_exactness() -> Outcome {
    let cases = [(0, 2e-3), (5000, 1.5e-3), (10000, 1.125e-3)];
    let worst = cases
        .iter()
        .map(|&(t, want)| ((lr_at(t) - want) / want).abs())
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-15,
        format!("worst relative error {worst:.1e} (limit 1e-15)"),
    )
}

// 8, 9, 10 ----------------------------------------------------------------

fn run_training(
    mode: Mode,
    use_ngrams: bool,
    train_c: &Corpus,
    dev: &Corpus,
) -> (TrainOutcome<f32>, Vec<String>, f64) {
    let start = Instant::now();
    let config = ModelConfig {
        use_ngrams,
        ..ModelConfig::desk(mode)
    };
    let cfg = TrainConfig::default();
    let m = init_model::<f32>(config, &cfg, train_c, [None, None, None]).unwrap();
    let mut log = Vec::new();
    let out = train(m, &cfg, train_c, dev, |r, _| {
        log.push(r.log_line());
        Ok(())
    })
    .unwrap();
    (out, log, start.elapsed().as_secs_f64())
}

fn end_to_end(train_c: &Corpus, dev: &Corpus) -> (Outcome, f64) {
    let (joint, _, secs) = run_training(Mode::JointMulti, true, train_c, dev);
    let r = joint.best_report;
    let (seg_only, _, seg_secs) = run_training(Mode::SegOnly, true, train_c, dev);
    let baseline = evaluate_model(&seg_only.best, dev).unwrap();
    let passed = r.seg.f1 >= 0.99
        && r.udep.f1 >= 0.95
        && r.ldep.f1 <= r.udep.f1
        && r.udep.f1 >= baseline.udep.f1
        && secs < 600.0;
    (
        outcome(
            passed,
            format!(
                "best epoch {} of {}: seg {:.4} (≥0.99), udep {:.4} (≥0.95), ldep {:.4}; seg-only+naive udep {:.4}; joint run {secs:.0}s, baseline run {seg_secs:.0}s (limit 600s)",
                joint.best_epoch,
                joint.epochs.len(),
                r.seg.f1,
                r.udep.f1,
                r.ldep.f1,
                baseline.udep.f1
            ),
        ),
        r.seg.f1,
    )
}

fn ablation(train_c: &Corpus, dev: &Corpus, full_seg: f64) -> Outcome {
    let (plain, _, _) = run_training(Mode::JointMulti, false, train_c, dev);
    let seg = plain.best_report.seg.f1;
    outcome(
        seg <= full_seg + 0.005,
        format!(
            "unigram-only seg {:.4} vs full {:.4} (may exceed by at most 0.5 points)",
            seg, full_seg
        ),
    )
}

fn reproducibility(train_c: &Corpus, dev: &Corpus) -> Outcome {
    let run = || {
        let config = ModelConfig::desk(Mode::JointMulti);
        let cfg = TrainConfig {
            max_epochs: 3,
            seed: 10,
            ..TrainConfig::default()
        };
        let m = init_model::<f32>(config, &cfg, train_c, [None, None, None]).unwrap();
        let mut log = String::new();
        let mut checkpoints = Vec::new();
        let out = train(m, &cfg, train_c, dev, |r, m| {
            log.push_str(&r.log_line());
            log.push('\n');
            let mut bytes = Vec::new();
            write_checkpoint(&m.store, &mut bytes)?;
            checkpoints.push(bytes);
            Ok(())
        })
        .unwrap();
        let sentences: Vec<&Sentence> = dev.sentences().collect();
        let parsed =
            parse_batch(&sentences, &out.best, DecodeConfig::new(Mode::JointMulti)).unwrap();
        let items = dev
            .sentences()
            .cloned()
            .zip(parsed.into_iter().map(|(wt, _)| wt))
            .collect();
        (log, checkpoints, write_corpus(&Corpus::new(items).unwrap()))
    };
    let (a, b) = (run(), run());
    let logs = a.0 == b.0;
    let ckpts = a.1 == b.1;
    let parses = a.2 == b.2;
    outcome(
        logs && ckpts && parses,
        format!(
            "logs identical {logs}, {} checkpoints identical {ckpts}, parses identical {parses}",
            a.1.len()
        ),
    )
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let (train_c, dev) = synth_split(1, 2000, 200);
    let mut rows: Vec<(u32, &str, bool, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, hard: bool, o: Outcome| {
        let tag = match (o.passed, hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "WARN",
        };
        println!("[{tag}] criterion {n:>2}  {name}: {}", o.detail);
        rows.push((n, name, hard, o));
    };
    report(1, "transform round-trip", true, transform_round_trip());
    report(2, "worked example fixture", true, figure_fixture());
    report(3, "decoder exactness", true, decoder_exactness());
    report(4, "app-constraint safety", true, app_constraint_safety());
    report(5, "gradient correctness", true, gradient_correctness());
    report(6, "metric oracle equivalence", true, metric_oracle());
    report(7, "schedule exactness", true, schedule_exactness());
    let (e2e, full_seg) = end_to_end(&train_c, &dev);
    report(8, "synthetic end-to-end", true, e2e);
    report(
        9,
        "n-gram ablation direction (soft)",
        false,
        ablation(&train_c, &dev, full_seg),
    );
    report(10, "reproducibility", true, reproducibility(&train_c, &dev));
    let failed: Vec<u32> = rows
        .iter()
        .filter(|(_, _, hard, o)| *hard && !o.passed)
        .map(|r| r.0)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all hard criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
