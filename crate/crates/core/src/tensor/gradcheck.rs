use super::{Grads, Graph, ParamStore, Var};
use crate::error::Result;

/// Outcome of comparing analytic gradients against central differences.
#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// `(parameter name, flat index, analytic, numeric)` for every
    /// coordinate over tolerance.
    pub failures: Vec<(String, usize, f64, f64)>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

// Gradients smaller than this are compared on an absolute scale; central
// differences cannot resolve relative error below it.
const REL_FLOOR: f64 = 1e-6;

pub(crate) fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Checks every coordinate of every parameter in `store` by central
/// differences with step `h`. `f` must build a scalar loss and be
/// deterministic (fixed dropout masks).
pub fn grad_check<F>(store: &ParamStore<f64>, f: F, h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>) -> Result<Var>,
{
    let mut grads = Grads::zeros_like(store);
    {
        let mut g = Graph::new(store);
        let loss = f(&mut g)?;
        g.backward(loss, &mut grads)?;
    }

    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new(s);
        let loss = f(&mut g)?;
        Ok(g.scalar(loss))
    };

    let mut work = store.clone();
    let mut report = GradCheckReport::default();
    for id in store.ids() {
        for i in 0..store.get(id).len() {
            let orig = work.get(id).data()[i];
            work.get_mut(id).data_mut()[i] = orig + h;
            let plus = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig - h;
            let minus = eval(&work)?;
            work.get_mut(id).data_mut()[i] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.get(id)[i];
            let err = rel_error(analytic, numeric);
            report.checked += 1;
            report.max_rel_error = report.max_rel_error.max(err);
            if err >= tol || !err.is_finite() {
                report
                    .failures
                    .push((store.name(id).to_string(), i, analytic, numeric));
            }
        }
    }
    Ok(report)
}
