//! Central finite-difference check of the full backward pass.

use exo_core::Class;
use serde::{Deserialize, Serialize};

use crate::model::{self, DropoutMask, Mode};
use crate::params::ModelParams;
use crate::IntentError;

/// Below this magnitude the absolute difference is used instead of the
/// relative one.
pub const ABS_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub checked: usize,
    pub max_error: f64,
    /// `tensor[index]` of the worst parameter.
    pub worst: String,
}

pub fn grad_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    let diff = (analytic - numeric).abs();
    if scale < ABS_FLOOR {
        diff
    } else {
        diff / scale
    }
}

fn loss_at(params: &ModelParams, xs: &[&[f64]], labels: &[Class], mask: &DropoutMask) -> Result<f64, IntentError> {
    let (probs, _) = model::forward_batch(params, xs, Mode::Train(mask))?;
    Ok(model::cross_entropy(&probs, labels))
}

/// Compares every analytic gradient with `(L(θ+ε) − L(θ−ε)) / 2ε` under a
/// fixed dropout mask.
pub fn check(params: &ModelParams, xs: &[&[f64]], labels: &[Class], mask: &DropoutMask, eps: f64) -> Result<GradCheck, IntentError> {
    let (grads, _, _) = model::backward(params, xs, labels, mask)?;
    let names: Vec<&'static str> = params.tensors().iter().map(|(n, _)| *n).collect();
    let mut p = params.clone();
    let mut out = GradCheck {
        checked: 0,
        max_error: 0.0,
        worst: String::new(),
    };
    for (ti, name) in names.iter().enumerate() {
        for i in 0..grads.0[ti].len() {
            let orig = p.tensors_mut()[ti].data[i];
            p.tensors_mut()[ti].data[i] = orig + eps;
            let up = loss_at(&p, xs, labels, mask)?;
            p.tensors_mut()[ti].data[i] = orig - eps;
            let down = loss_at(&p, xs, labels, mask)?;
            p.tensors_mut()[ti].data[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let err = grad_error(grads.0[ti][i], numeric);
            out.checked += 1;
            if err > out.max_error || out.worst.is_empty() {
                out.max_error = err;
                out.worst = format!("{name}[{i}]");
            }
        }
    }
    Ok(out)
}
