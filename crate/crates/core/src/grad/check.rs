//! Central finite-difference checks of analytic gradients.

use super::{GradError, Graph, Tensor, Var};

/// Outcome of comparing analytic and numeric gradients of a scalar function.
#[derive(Debug, Clone)]
pub struct GradCheck {
    /// `|analytic - numeric| / max(|analytic|, |numeric|)` measured on the
    /// concatenated gradient vector (Euclidean norms).
    pub relative_error: f64,
    pub analytic: Vec<Tensor>,
    pub numeric: Vec<Tensor>,
}

/// Compare the gradient of `f` at `inputs` with central differences of step `h`.
///
/// `f` must build a scalar from the given parameter vars; it is re-run once per
/// perturbed coordinate and never differentiated for the numeric side.
pub fn finite_difference_check<F>(inputs: &[Tensor], h: f64, f: F) -> Result<GradCheck, GradError>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>, GradError>,
{
    let graph = Graph::new();
    let vars: Vec<Var<'_>> = inputs.iter().map(|t| graph.param(t.clone())).collect();
    let root = f(&graph, &vars)?;
    graph.backward(root)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| graph.grad_or_zeros(*v)).collect();

    let eval = |ts: &[Tensor]| -> Result<f64, GradError> {
        let g = Graph::new();
        let vs: Vec<Var<'_>> = ts.iter().map(|t| g.constant(t.clone())).collect();
        Ok(f(&g, &vs)?.item())
    };
    let mut numeric = Vec::with_capacity(inputs.len());
    let mut work: Vec<Tensor> = inputs.to_vec();
    for i in 0..inputs.len() {
        let mut grad = Tensor::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let orig = work[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let plus = eval(&work)?;
            work[i].data_mut()[j] = orig - h;
            let minus = eval(&work)?;
            work[i].data_mut()[j] = orig;
            grad.data_mut()[j] = (plus - minus) / (2.0 * h);
        }
        numeric.push(grad);
    }

    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    for (a, n) in analytic.iter().zip(&numeric) {
        for (x, y) in a.data().iter().zip(n.data()) {
            diff += (x - y) * (x - y);
            na += x * x;
            nn += y * y;
        }
    }
    let scale = na.sqrt().max(nn.sqrt());
    let relative_error = if scale == 0.0 { 0.0 } else { diff.sqrt() / scale };
    Ok(GradCheck { relative_error, analytic, numeric })
}
