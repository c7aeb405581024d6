use super::params::{Grads, ParamId, ParamStore};
use super::{dims2, Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, T),
    Tanh(Var),
    Sigmoid(Var),
    LeakyRelu(Var, T),
    Mask(Var, Vec<T>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    Embedding(ParamId, Vec<usize>),
    RowSelect(Var, Var, Vec<bool>),
    CrossEntropy(Var, Vec<Option<usize>>, Vec<T>),
    Sum(Var),
    AddN(Vec<Var>),
    LabelBilinear(Var, Var, Var, Vec<T>),
}

struct Node<T> {
    shape: Vec<usize>,
    /// Empty for parameter leaves, whose values live in the store.
    value: Vec<T>,
    op: Op<T>,
    tracked: bool,
}

/// A record of primitive applications, evaluated eagerly on construction.
///
/// Nodes are appended after their inputs, so reverse insertion order is a
/// valid reverse topological order for [`Graph::backward`].
pub struct Graph<'p, T: Real> {
    params: &'p ParamStore<T>,
    nodes: Vec<Node<T>>,
}

fn check_same(what: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::Dimension(format!("{what}: {:?} vs {:?}", a, b)));
    }
    Ok(())
}

impl<'p, T: Real> Graph<'p, T> {
    pub fn new(params: &'p ParamStore<T>) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'p ParamStore<T> {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[T] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.params.get(id).data(),
            _ => &node.value,
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        dims2(&self.nodes[v.0].shape).expect("matrix node")
    }

    pub fn tensor(&self, v: Var) -> Tensor<T> {
        Tensor::new(self.shape(v).to_vec(), self.value(v).to_vec()).expect("consistent node")
    }

    /// The value of a scalar node.
    pub fn scalar(&self, v: Var) -> T {
        self.value(v)[0]
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>, tracked: bool) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == shape.iter().product::<usize>());
        self.nodes.push(Node {
            shape,
            value,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn mat(&self, v: Var) -> Result<(usize, usize)> {
        dims2(&self.nodes[v.0].shape)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        let Tensor { shape, data } = t;
        self.push(shape, data, Op::Constant, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let shape = self.params.get(id).shape().to_vec();
        self.push(shape, Vec::new(), Op::Param(id), true)
    }

    pub fn param_by_name(&mut self, name: &str) -> Result<Var> {
        let id = self
            .params
            .id(name)
            .ok_or_else(|| Error::Contract(format!("unknown parameter {name}")))?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat(a)?;
        let (k2, n) = self.mat(b)?;
        if k != k2 {
            return Err(Error::Dimension(format!("matmul {m}×{k} · {k2}×{n}")));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            self.value(a),
            k as isize,
            1,
            self.value(b),
            n as isize,
            1,
            T::zero(),
            &mut out,
        );
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), tracked))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        let src = self.value(a);
        let mut out = vec![T::zero(); m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = src[i * n + j];
            }
        }
        let tracked = self.tracked(a);
        Ok(self.push(vec![n, m], out, Op::Transpose(a), tracked))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let len: usize = shape.iter().product();
        if len != self.value(a).len() {
            return Err(Error::Dimension(format!(
                "cannot reshape {:?} into {:?}",
                self.shape(a),
                shape
            )));
        }
        let out = self.value(a).to_vec();
        let tracked = self.tracked(a);
        Ok(self.push(shape, out, Op::Reshape(a), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("add", self.shape(a), self.shape(b))?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x + *y)
            .collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(shape, out, Op::Add(a, b), tracked))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        check_same("mul", self.shape(a), self.shape(b))?;
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| *x * *y)
            .collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(shape, out, Op::Mul(a, b), tracked))
    }

    /// Adds a length-`n` row vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if self.value(row).len() != n {
            return Err(Error::Dimension(format!(
                "add_row {m}×{n} + {:?}",
                self.shape(row)
            )));
        }
        let r = self.value(row);
        let out = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| *x + r[i % n])
            .collect();
        let tracked = self.tracked(a) || self.tracked(row);
        Ok(self.push(vec![m, n], out, Op::AddRow(a, row), tracked))
    }

    pub fn scale(&mut self, a: Var, factor: T) -> Var {
        let out = self.value(a).iter().map(|x| *x * factor).collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a);
        self.push(shape, out, Op::Scale(a, factor), tracked)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|x| x.tanh()).collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a);
        self.push(shape, out, Op::Tanh(a), tracked)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a);
        self.push(shape, out, Op::Sigmoid(a), tracked)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: T) -> Var {
        let out = self
            .value(a)
            .iter()
            .map(|&x| if x > T::zero() { x } else { x * slope })
            .collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a);
        self.push(shape, out, Op::LeakyRelu(a, slope), tracked)
    }

    /// Inverted dropout with a caller-supplied keep mask: kept entries are
    /// scaled by `1/(1-p)`, dropped entries become zero.
    pub fn dropout(&mut self, a: Var, p: f64, keep: &[bool]) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Contract(format!("dropout rate {p} outside [0, 1)")));
        }
        if keep.len() != self.value(a).len() {
            return Err(Error::Dimension(format!(
                "dropout mask of {} for {:?}",
                keep.len(),
                self.shape(a)
            )));
        }
        let scale = T::lit(1.0 / (1.0 - p));
        let mask: Vec<T> = keep
            .iter()
            .map(|&k| if k { scale } else { T::zero() })
            .collect();
        Ok(self.apply_mask(a, mask))
    }

    /// Dropout whose mask is shared by every row: `keep` has one entry per
    /// column.
    pub fn dropout_cols(&mut self, a: Var, p: f64, keep: &[bool]) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if keep.len() != n {
            return Err(Error::Dimension(format!(
                "column dropout mask of {} for {m}×{n}",
                keep.len()
            )));
        }
        let full: Vec<bool> = (0..m).flat_map(|_| keep.iter().copied()).collect();
        self.dropout(a, p, &full)
    }

    fn apply_mask(&mut self, a: Var, mask: Vec<T>) -> Var {
        let out = self
            .value(a)
            .iter()
            .zip(&mask)
            .map(|(x, m)| *x * *m)
            .collect();
        let shape = self.shape(a).to_vec();
        let tracked = self.tracked(a);
        self.push(shape, out, Op::Mask(a, mask), tracked)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of nothing".into()));
        }
        let (m, _) = self.mat(parts[0])?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.mat(p)?;
            if r != m {
                return Err(Error::Dimension(format!("concat_cols rows {r} vs {m}")));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.value(p)[i * w..(i + 1) * w]);
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        let shape = if self.shape(parts[0]).len() == 1 {
            vec![total]
        } else {
            vec![m, total]
        };
        Ok(self.push(shape, out, Op::ConcatCols(parts.to_vec()), tracked))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Contract("concat of nothing".into()));
        }
        let (_, n) = self.mat(parts[0])?;
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.mat(p)?;
            if c != n {
                return Err(Error::Dimension(format!("concat_rows cols {c} vs {n}")));
            }
            rows += r;
        }
        let mut out = Vec::with_capacity(rows * n);
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(vec![rows, n], out, Op::ConcatRows(parts.to_vec()), tracked))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if start > end || end > n {
            return Err(Error::Index(format!("columns {start}..{end} of {n}")));
        }
        let w = end - start;
        let src = self.value(a);
        let mut out = Vec::with_capacity(m * w);
        for i in 0..m {
            out.extend_from_slice(&src[i * n + start..i * n + end]);
        }
        let tracked = self.tracked(a);
        Ok(self.push(vec![m, w], out, Op::SliceCols(a, start), tracked))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if start > end || end > m {
            return Err(Error::Index(format!("rows {start}..{end} of {m}")));
        }
        let out = self.value(a)[start * n..end * n].to_vec();
        let tracked = self.tracked(a);
        Ok(self.push(vec![end - start, n], out, Op::SliceRows(a, start), tracked))
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (m, n) = self.mat(a)?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(Error::Index(format!("row {bad} of {m}")));
        }
        let src = self.value(a);
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            out.extend_from_slice(&src[r * n..(r + 1) * n]);
        }
        let tracked = self.tracked(a);
        Ok(self.push(
            vec![rows.len(), n],
            out,
            Op::GatherRows(a, rows.to_vec()),
            tracked,
        ))
    }

    /// Looks up rows of a parameter table directly; the backward pass
    /// scatters into just those rows.
    pub fn embedding(&mut self, table: ParamId, rows: &[usize]) -> Result<Var> {
        let t = self.params.get(table);
        let (m, n) = t.dims2()?;
        if let Some(&bad) = rows.iter().find(|&&r| r >= m) {
            return Err(Error::Index(format!("embedding row {bad} of {m}")));
        }
        let src = t.data();
        let mut out = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            out.extend_from_slice(&src[r * n..(r + 1) * n]);
        }
        Ok(self.push(
            vec![rows.len(), n],
            out,
            Op::Embedding(table, rows.to_vec()),
            true,
        ))
    }

    /// Row-wise choice: row `r` comes from `a` when `take_a[r]`, else `b`.
    pub fn row_select(&mut self, a: Var, b: Var, take_a: &[bool]) -> Result<Var> {
        check_same("row_select", self.shape(a), self.shape(b))?;
        let (m, n) = self.mat(a)?;
        if take_a.len() != m {
            return Err(Error::Dimension(format!(
                "row_select mask {} for {m} rows",
                take_a.len()
            )));
        }
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(m * n);
        for (r, &t) in take_a.iter().enumerate() {
            let src = if t { va } else { vb };
            out.extend_from_slice(&src[r * n..(r + 1) * n]);
        }
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(
            vec![m, n],
            out,
            Op::RowSelect(a, b, take_a.to_vec()),
            tracked,
        ))
    }

    /// Summed softmax cross-entropy over the rows of `logits`; rows whose
    /// target is `None` are ignored. Returns a scalar.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Result<Var> {
        let (m, n) = self.mat(logits)?;
        if targets.len() != m {
            return Err(Error::Dimension(format!(
                "{} targets for {m} rows",
                targets.len()
            )));
        }
        let x = self.value(logits);
        let mut probs = vec![T::zero(); m * n];
        let mut loss = T::zero();
        for (r, target) in targets.iter().enumerate() {
            let Some(t) = *target else { continue };
            if t >= n {
                return Err(Error::Index(format!("gold index {t} for {n} classes")));
            }
            let row = &x[r * n..(r + 1) * n];
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (p, &v) in probs[r * n..(r + 1) * n].iter_mut().zip(row) {
                *p = (v - max).exp();
                z += *p;
            }
            for p in &mut probs[r * n..(r + 1) * n] {
                *p /= z;
            }
            loss += max + z.ln() - row[t];
        }
        let tracked = self.tracked(logits);
        Ok(self.push(
            vec![],
            vec![loss],
            Op::CrossEntropy(logits, targets.to_vec(), probs),
            tracked,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let total = self.value(a).iter().copied().sum();
        let tracked = self.tracked(a);
        self.push(vec![], vec![total], Op::Sum(a), tracked)
    }

    /// Elementwise sum of equally shaped nodes.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::Contract("add_n of nothing".into()))?;
        let shape = self.shape(first).to_vec();
        let mut out = vec![T::zero(); self.value(first).len()];
        for &p in parts {
            check_same("add_n", &shape, self.shape(p))?;
            for (o, v) in out.iter_mut().zip(self.value(p)) {
                *o += *v;
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(shape, out, Op::AddN(parts.to_vec()), tracked))
    }

    /// Per-row bilinear scores through a stack of `K` square matrices:
    /// `out[r][k] = heads[r] · slices[k] · deps[r]`, with `heads`, `deps`
    /// both `P×p` and `slices` shaped `K×p×p`.
    pub fn label_bilinear(&mut self, heads: Var, deps: Var, slices: Var) -> Result<Var> {
        let (rows, p) = self.mat(heads)?;
        check_same("label_bilinear", self.shape(heads), self.shape(deps))?;
        let k = match self.shape(slices) {
            [k, a, b] if *a == p && *b == p => *k,
            s => {
                return Err(Error::Dimension(format!(
                    "label tensor {:?} for width {p}",
                    s
                )))
            }
        };
        // proj[r][k*p + a] = sum_b slices[k][a][b] * deps[r][b]
        let mut proj = vec![T::zero(); rows * k * p];
        T::gemm(
            rows,
            p,
            k * p,
            self.value(deps),
            p as isize,
            1,
            self.value(slices),
            1,
            p as isize,
            T::zero(),
            &mut proj,
        );
        let h = self.value(heads);
        let mut out = vec![T::zero(); rows * k];
        for r in 0..rows {
            let hr = &h[r * p..(r + 1) * p];
            for kk in 0..k {
                let pr = &proj[r * k * p + kk * p..r * k * p + (kk + 1) * p];
                out[r * k + kk] = hr.iter().zip(pr).map(|(x, y)| *x * *y).sum();
            }
        }
        let tracked = self.tracked(heads) || self.tracked(deps) || self.tracked(slices);
        Ok(self.push(
            vec![rows, k],
            out,
            Op::LabelBilinear(heads, deps, slices, proj),
            tracked,
        ))
    }

    /// Reverse-mode pass from a scalar `loss`, adding each parameter's
    /// gradient into `grads`. Calling it twice accumulates twice.
    pub fn backward(&self, loss: Var, grads: &mut Grads<T>) -> Result<()> {
        if self.value(loss).len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        adj[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            self.propagate(node, &g, &mut adj, grads);
        }
        Ok(())
    }

    fn propagate(&self, node: &Node<T>, g: &[T], adj: &mut [Option<Vec<T>>], grads: &mut Grads<T>) {
        let tracked = |v: Var| self.nodes[v.0].tracked;
        match &node.op {
            Op::Constant => {}
            Op::Param(id) => {
                for (acc, x) in grads.get_mut(*id).iter_mut().zip(g) {
                    *acc += *x;
                }
            }
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let n = node.shape[1];
                if tracked(*a) {
                    // dA = dC · Bᵀ
                    let da = slot(adj, *a, m * k);
                    T::gemm(
                        m,
                        n,
                        k,
                        g,
                        n as isize,
                        1,
                        self.value(*b),
                        1,
                        n as isize,
                        T::one(),
                        da,
                    );
                }
                if tracked(*b) {
                    // dB = Aᵀ · dC
                    let db = slot(adj, *b, k * n);
                    T::gemm(
                        k,
                        m,
                        n,
                        self.value(*a),
                        1,
                        k as isize,
                        g,
                        n as isize,
                        1,
                        T::one(),
                        db,
                    );
                }
            }
            Op::Transpose(a) => {
                let (m, n) = self.dims(*a);
                let da = slot(adj, *a, m * n);
                for i in 0..m {
                    for j in 0..n {
                        da[i * n + j] += g[j * m + i];
                    }
                }
            }
            Op::Reshape(a) => accumulate(slot(adj, *a, g.len()), g),
            Op::Add(a, b) => {
                if tracked(*a) {
                    accumulate(slot(adj, *a, g.len()), g);
                }
                if tracked(*b) {
                    accumulate(slot(adj, *b, g.len()), g);
                }
            }
            Op::Mul(a, b) => {
                if tracked(*a) {
                    let vb = self.value(*b);
                    let da = slot(adj, *a, g.len());
                    for i in 0..g.len() {
                        da[i] += g[i] * vb[i];
                    }
                }
                if tracked(*b) {
                    let va = self.value(*a);
                    let db = slot(adj, *b, g.len());
                    for i in 0..g.len() {
                        db[i] += g[i] * va[i];
                    }
                }
            }
            Op::AddRow(a, row) => {
                if tracked(*a) {
                    accumulate(slot(adj, *a, g.len()), g);
                }
                if tracked(*row) {
                    let n = node.shape[1];
                    let dr = slot(adj, *row, n);
                    for (i, x) in g.iter().enumerate() {
                        dr[i % n] += *x;
                    }
                }
            }
            Op::Scale(a, f) => {
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    da[i] += g[i] * *f;
                }
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    da[i] += g[i] * (T::one() - y[i] * y[i]);
                }
            }
            Op::Sigmoid(a) => {
                let y = &node.value;
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    da[i] += g[i] * y[i] * (T::one() - y[i]);
                }
            }
            Op::LeakyRelu(a, slope) => {
                let x = self.value(*a);
                let mut local = vec![T::zero(); g.len()];
                for i in 0..g.len() {
                    local[i] = if x[i] > T::zero() {
                        g[i]
                    } else {
                        g[i] * *slope
                    };
                }
                accumulate(slot(adj, *a, g.len()), &local);
            }
            Op::Mask(a, mask) => {
                let da = slot(adj, *a, g.len());
                for i in 0..g.len() {
                    da[i] += g[i] * mask[i];
                }
            }
            Op::ConcatCols(parts) => {
                let m = g.len() / node.shape.last().copied().unwrap_or(1);
                let total = g.len() / m.max(1);
                let mut offset = 0;
                for &p in parts {
                    let w = self.dims(p).1;
                    if tracked(p) {
                        let dp = slot(adj, p, m * w);
                        for i in 0..m {
                            for j in 0..w {
                                dp[i * w + j] += g[i * total + offset + j];
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if tracked(p) {
                        accumulate(slot(adj, p, len), &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::SliceCols(a, start) => {
                let (m, n) = self.dims(*a);
                let w = node.shape[1];
                let da = slot(adj, *a, m * n);
                for i in 0..m {
                    for j in 0..w {
                        da[i * n + start + j] += g[i * w + j];
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let (m, n) = self.dims(*a);
                let da = slot(adj, *a, m * n);
                accumulate(&mut da[start * n..start * n + g.len()], g);
            }
            Op::GatherRows(a, rows) => {
                let (m, n) = self.dims(*a);
                let da = slot(adj, *a, m * n);
                for (i, &r) in rows.iter().enumerate() {
                    accumulate(&mut da[r * n..(r + 1) * n], &g[i * n..(i + 1) * n]);
                }
            }
            Op::Embedding(table, rows) => {
                let n = node.shape[1];
                let dt = grads.get_mut(*table);
                for (i, &r) in rows.iter().enumerate() {
                    accumulate(&mut dt[r * n..(r + 1) * n], &g[i * n..(i + 1) * n]);
                }
            }
            Op::RowSelect(a, b, take_a) => {
                let n = node.shape[1];
                for (which, var) in [(true, *a), (false, *b)] {
                    if !tracked(var) {
                        continue;
                    }
                    let dv = slot(adj, var, g.len());
                    for (r, &t) in take_a.iter().enumerate() {
                        if t == which {
                            accumulate(&mut dv[r * n..(r + 1) * n], &g[r * n..(r + 1) * n]);
                        }
                    }
                }
            }
            Op::CrossEntropy(logits, targets, probs) => {
                let n = self.dims(*logits).1;
                let scale = g[0];
                let dl = slot(adj, *logits, probs.len());
                for (r, target) in targets.iter().enumerate() {
                    let Some(t) = *target else { continue };
                    for j in 0..n {
                        let onehot = if j == t { T::one() } else { T::zero() };
                        dl[r * n + j] += scale * (probs[r * n + j] - onehot);
                    }
                }
            }
            Op::Sum(a) => {
                let len = self.value(*a).len();
                let da = slot(adj, *a, len);
                for x in da.iter_mut() {
                    *x += g[0];
                }
            }
            Op::AddN(parts) => {
                for &p in parts {
                    if tracked(p) {
                        accumulate(slot(adj, p, g.len()), g);
                    }
                }
            }
            Op::LabelBilinear(heads, deps, slices, proj) => {
                let (rows, p) = self.dims(*heads);
                let k = node.shape[1];
                let h = self.value(*heads);
                if tracked(*heads) {
                    let dh = slot(adj, *heads, rows * p);
                    for r in 0..rows {
                        for kk in 0..k {
                            let gr = g[r * k + kk];
                            let pr = &proj[r * k * p + kk * p..r * k * p + (kk + 1) * p];
                            for a in 0..p {
                                dh[r * p + a] += gr * pr[a];
                            }
                        }
                    }
                }
                if tracked(*deps) || tracked(*slices) {
                    // dproj[r][k*p + a] = g[r][k] * heads[r][a]
                    let mut dproj = vec![T::zero(); rows * k * p];
                    for r in 0..rows {
                        for kk in 0..k {
                            let gr = g[r * k + kk];
                            for a in 0..p {
                                dproj[r * k * p + kk * p + a] = gr * h[r * p + a];
                            }
                        }
                    }
                    if tracked(*deps) {
                        let dd = slot(adj, *deps, rows * p);
                        T::gemm(
                            rows,
                            k * p,
                            p,
                            &dproj,
                            (k * p) as isize,
                            1,
                            self.value(*slices),
                            p as isize,
                            1,
                            T::one(),
                            dd,
                        );
                    }
                    if tracked(*slices) {
                        let ds = slot(adj, *slices, k * p * p);
                        T::gemm(
                            k * p,
                            rows,
                            p,
                            &dproj,
                            1,
                            (k * p) as isize,
                            self.value(*deps),
                            p as isize,
                            1,
                            T::one(),
                            ds,
                        );
                    }
                }
            }
        }
    }
}

fn slot<T: Real>(adj: &mut [Option<Vec<T>>], v: Var, len: usize) -> &mut [T] {
    adj[v.0].get_or_insert_with(|| vec![T::zero(); len])
}

fn accumulate<T: Real>(dst: &mut [T], src: &[T]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += *s;
    }
}

pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}
