use serde::{Deserialize, Serialize};

use crate::params::{Grads, ModelParams};
use crate::IntentError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one buffer per trainable tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step(params: &mut ModelParams, grads: &Grads, state: &mut AdamState, lr: f64) -> Result<(), IntentError> {
    let mut tensors = params.tensors_mut();
    if grads.0.len() != tensors.len() || state.m.len() != tensors.len() {
        return Err(IntentError::Shape {
            layer: "adam".into(),
            expected: vec![tensors.len()],
            found: vec![grads.0.len()],
        });
    }
    for (i, (t, g)) in tensors.iter().zip(&grads.0).enumerate() {
        if t.len() != g.len() || state.m[i].len() != g.len() {
            return Err(IntentError::Shape {
                layer: format!("adam tensor {i}"),
                expected: vec![t.len()],
                found: vec![g.len()],
            });
        }
    }
    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for (i, t) in tensors.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[i], &mut state.v[i], &grads.0[i]);
        for j in 0..g.len() {
            m[j] = BETA1 * m[j] + (1.0 - BETA1) * g[j];
            v[j] = BETA2 * v[j] + (1.0 - BETA2) * g[j] * g[j];
            let mhat = m[j] / bc1;
            let vhat = v[j] / bc2;
            t.data[j] -= lr * mhat / (vhat.sqrt() + EPSILON);
        }
    }
    Ok(())
}
