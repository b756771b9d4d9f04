//! Central-difference validation of analytic gradients.

use super::graph::{Graph, NodeId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Outcome of a gradient check.
#[derive(Clone, Copy, Debug)]
pub struct GradCheckReport {
    /// max over coordinates of |analytic - numeric| / max(1, |analytic|)
    pub max_rel_err: f64,
    /// Coordinate index attaining the maximum.
    pub worst_coord: usize,
}

/// Compare the analytic gradient of `loss_fn` at `point` against central
/// differences with step `eps`.
///
/// `loss_fn` builds a scalar loss from the input node; it is re-invoked on a
/// fresh graph for every perturbed evaluation, so it must be a pure function
/// of the input tensor.
pub fn grad_check<F>(loss_fn: F, point: &Tensor, eps: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, NodeId) -> NodeId,
{
    if !(eps > 0.0 && eps <= 1e-2) {
        return Err(Error::InvalidArgument(format!(
            "grad_check eps must be in (0, 1e-2], got {eps}"
        )));
    }

    let mut graph = Graph::new();
    let x = graph.param(point.clone());
    let loss = loss_fn(&mut graph, x);
    if graph.value(loss).numel() != 1 {
        return Err(Error::InvalidArgument(
            "grad_check loss_fn must produce a scalar".into(),
        ));
    }
    if !graph.value(loss).is_finite() {
        return Err(Error::NonFinite("loss at the unperturbed point".into()));
    }
    let grads = graph.backward(loss);
    let analytic = grads.get_or_zeros(x, point.shape());

    let eval = |data: &[f64]| -> f64 {
        let mut g = Graph::new();
        let x = g.constant(Tensor::from_vec(point.shape().to_vec(), data.to_vec()));
        let l = loss_fn(&mut g, x);
        g.value(l).item()
    };

    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_coord: 0,
    };
    let mut data = point.data().to_vec();
    for i in 0..data.len() {
        let orig = data[i];
        data[i] = orig + eps;
        let plus = eval(&data);
        data[i] = orig - eps;
        let minus = eval(&data);
        data[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss at perturbed coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        let rel = (a - numeric).abs() / a.abs().max(1.0);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_coord = i;
        }
    }
    Ok(report)
}
