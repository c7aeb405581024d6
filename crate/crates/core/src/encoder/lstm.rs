use super::BatchLayout;
use crate::dropout::Dropout;
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamId, Real, Tensor, Var};

/// One direction of one layer. Gate blocks are ordered input, forget,
/// cell, output along the `4H` axis.
#[derive(Clone, Copy, Debug)]
pub struct LstmDirection {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
}

/// Stacked bidirectional LSTM.
#[derive(Clone, Debug)]
pub struct BiLstm {
    pub layers: Vec<[LstmDirection; 2]>,
    pub input_dim: usize,
    pub hidden: usize,
}

impl BiLstm {
    pub fn output_dim(&self) -> usize {
        2 * self.hidden
    }

    /// Runs the stack over a time-major batch `x` of `(L·B)×input_dim`
    /// rows and returns `(L·B)×2H`. Padding steps leave the recurrent state
    /// untouched, so right-to-left passes start from zero at each
    /// sentence's last character. Layer inputs get one dropout mask per
    /// sentence, shared across time steps.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        x: Var,
        layout: &BatchLayout,
        dropout: &mut Dropout,
    ) -> Result<Var> {
        if layout.max_len == 0 || layout.lengths.contains(&0) {
            return Err(Error::Input("cannot encode an empty sentence".into()));
        }
        let (rows, width) = g.dims(x);
        if rows != layout.rows() || width != self.input_dim {
            return Err(Error::Dimension(format!(
                "BiLSTM input {rows}×{width}, expected {}×{}",
                layout.rows(),
                self.input_dim
            )));
        }
        let mut input = x;
        for layer in &self.layers {
            let (_, d_in) = g.dims(input);
            let p = dropout.rates().lstm;
            if let Some(per_sentence) = dropout.mask(p, layout.batch * d_in) {
                let keep: Vec<bool> = (0..layout.max_len)
                    .flat_map(|_| per_sentence.iter().copied())
                    .collect();
                input = g.dropout(input, p, &keep)?;
            }
            let fwd = self.run_direction(g, input, &layer[0], layout, false)?;
            let bwd = self.run_direction(g, input, &layer[1], layout, true)?;
            input = g.concat_cols(&[fwd, bwd])?;
        }
        Ok(input)
    }

    fn run_direction<T: Real>(
        &self,
        g: &mut Graph<T>,
        x: Var,
        dir: &LstmDirection,
        layout: &BatchLayout,
        reverse: bool,
    ) -> Result<Var> {
        let h = self.hidden;
        let b = layout.batch;
        let w_in = g.param(dir.w_input);
        let w_hid = g.param(dir.w_hidden);
        let bias = g.param(dir.bias);
        let projected = g.matmul(x, w_in)?;
        let projected = g.add_row(projected, bias)?;

        let mut state: Option<(Var, Var)> = None;
        let mut outputs = vec![None; layout.max_len];
        let steps: Vec<usize> = if reverse {
            (0..layout.max_len).rev().collect()
        } else {
            (0..layout.max_len).collect()
        };
        for t in steps {
            let mut z = g.slice_rows(projected, t * b, (t + 1) * b)?;
            if let Some((h_prev, _)) = state {
                let rec = g.matmul(h_prev, w_hid)?;
                z = g.add(z, rec)?;
            }
            let i_gate = g.slice_cols(z, 0, h)?;
            let i_gate = g.sigmoid(i_gate);
            let f_gate = g.slice_cols(z, h, 2 * h)?;
            let f_gate = g.sigmoid(f_gate);
            let cell = g.slice_cols(z, 2 * h, 3 * h)?;
            let cell = g.tanh(cell);
            let o_gate = g.slice_cols(z, 3 * h, 4 * h)?;
            let o_gate = g.sigmoid(o_gate);

            let mut c = g.mul(i_gate, cell)?;
            if let Some((_, c_prev)) = state {
                let kept = g.mul(f_gate, c_prev)?;
                c = g.add(c, kept)?;
            }
            let c_act = g.tanh(c);
            let mut h_new = g.mul(o_gate, c_act)?;

            let valid: Vec<bool> = layout.lengths.iter().map(|&n| t < n).collect();
            if valid.iter().any(|v| !v) {
                let (h_prev, c_prev) = match state {
                    Some(s) => s,
                    None => {
                        let zero = g.constant(Tensor::zeros(vec![b, h]));
                        (zero, zero)
                    }
                };
                h_new = g.row_select(h_new, h_prev, &valid)?;
                c = g.row_select(c, c_prev, &valid)?;
            }
            state = Some((h_new, c));
            outputs[t] = Some(h_new);
        }
        let outputs: Vec<Var> = outputs
            .into_iter()
            .map(|o| o.expect("every step"))
            .collect();
        g.concat_rows(&outputs)
    }
}
