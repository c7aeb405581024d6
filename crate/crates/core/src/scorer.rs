//! Biaffine arc and label scoring on top of encoder states.

use crate::dropout::Dropout;
use crate::error::Result;
use crate::tensor::{Graph, ParamId, Real, Tensor, Var};

/// Negative slope of the MLP activation.
pub const LEAKY_SLOPE: f64 = 0.1;

/// A single hidden layer: `leaky_relu(x·W + b)`.
#[derive(Clone, Copy, Debug)]
pub struct Mlp {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Mlp {
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        x: Var,
        dropout_rate: f64,
        dropout: &mut Dropout,
    ) -> Result<Var> {
        let w = g.param(self.weight);
        let b = g.param(self.bias);
        let z = g.matmul(x, w)?;
        let z = g.add_row(z, b)?;
        let y = g.leaky_relu(z, T::lit(LEAKY_SLOPE));
        let len = g.value(y).len();
        match dropout.mask(dropout_rate, len) {
            Some(keep) => g.dropout(y, dropout_rate, &keep),
            None => Ok(y),
        }
    }
}

/// Unlabeled arc scorer: `s_ij = r_i·U·r_j + r_i·u` with `i` the head.
#[derive(Clone, Copy, Debug)]
pub struct ArcScorer {
    pub head_mlp: Mlp,
    pub dep_mlp: Mlp,
    pub bilinear: ParamId,
    pub head_bias: ParamId,
}

/// Label scorer: per label `k`, `r_i·U_k·r_j + W_k·(r_i ⊕ r_j) + b_k`.
#[derive(Clone, Copy, Debug)]
pub struct LabelScorer {
    pub head_mlp: Mlp,
    pub dep_mlp: Mlp,
    pub bilinear: ParamId,
    pub linear: ParamId,
    pub bias: ParamId,
}

/// The segmentation-only model has no arc scorer.
#[derive(Clone, Copy, Debug)]
pub struct ScorerParams {
    pub arc: Option<ArcScorer>,
    pub label: LabelScorer,
}

/// MLP projections of every encoder row.
#[derive(Clone, Copy, Debug)]
pub struct Projections {
    pub arc_head: Option<Var>,
    pub arc_dep: Option<Var>,
    pub label_head: Var,
    pub label_dep: Var,
}

pub fn project<T: Real>(
    g: &mut Graph<T>,
    states: Var,
    p: &ScorerParams,
    dropout: &mut Dropout,
) -> Result<Projections> {
    let rates = dropout.rates();
    let (arc_head, arc_dep) = match &p.arc {
        Some(a) => (
            Some(a.head_mlp.forward(g, states, rates.arc_mlp, dropout)?),
            Some(a.dep_mlp.forward(g, states, rates.arc_mlp, dropout)?),
        ),
        None => (None, None),
    };
    Ok(Projections {
        arc_head,
        arc_dep,
        label_head: p
            .label
            .head_mlp
            .forward(g, states, rates.label_mlp, dropout)?,
        label_dep: p
            .label
            .dep_mlp
            .forward(g, states, rates.label_mlp, dropout)?,
    })
}

/// Scores every (head, dependent) pair. `r_head` has one row per head
/// candidate including the root, `r_dep` one row per dependent; the result
/// is `heads × dependents` and column `j` holds the head logits of
/// dependent `j`.
///
/// The head-bias term is folded into the bilinear product by appending a
/// constant 1 to every dependent vector and `u` as an extra column of `U`.
pub fn score_arcs<T: Real>(
    g: &mut Graph<T>,
    r_head: Var,
    r_dep: Var,
    bilinear: Var,
    head_bias: Var,
) -> Result<Var> {
    let (a, _) = g.dims(bilinear);
    let (deps, _) = g.dims(r_dep);
    let bias_col = g.reshape(head_bias, vec![a, 1])?;
    let extended = g.concat_cols(&[bilinear, bias_col])?;
    let left = g.matmul(r_head, extended)?;
    let ones = g.constant(Tensor::filled(vec![deps, 1], T::one()));
    let dep1 = g.concat_cols(&[r_dep, ones])?;
    let dep1_t = g.transpose(dep1)?;
    g.matmul(left, dep1_t)
}

/// Scores all labels for aligned rows of head and dependent projections:
/// `P×p` each, giving `P×K`.
pub fn score_labels<T: Real>(
    g: &mut Graph<T>,
    heads: Var,
    deps: Var,
    bilinear: Var,
    linear: Var,
    bias: Var,
) -> Result<Var> {
    let bil = g.label_bilinear(heads, deps, bilinear)?;
    let pair = g.concat_cols(&[heads, deps])?;
    let w_t = g.transpose(linear)?;
    let lin = g.matmul(pair, w_t)?;
    let s = g.add(bil, lin)?;
    g.add_row(s, bias)
}

/// Scores of one sentence: `arc` is `(n+1)×n` (rows are heads including
/// the root, columns dependents `1..=n`), and `labels` holds one row of
/// `K` scores per entry of `pairs`, given as `(dependent, head)`.
#[derive(Clone, Debug)]
pub struct ScoreSet<T> {
    pub arc: Option<Tensor<T>>,
    pub pairs: Vec<(usize, usize)>,
    pub labels: Tensor<T>,
}
