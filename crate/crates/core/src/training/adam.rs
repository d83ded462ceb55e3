use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Gradient;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Moment accumulators congruent with a parameter store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            beta1: BETA1,
            beta2: BETA2,
            epsilon: ADAM_EPSILON,
        }
    }
}

/// Bias-corrected Adam update. Rejects non-finite gradients before
/// touching any state.
pub fn adam_step(params: &mut [f64], grad: &Gradient, state: &mut AdamState, lr: f64) -> Result<()> {
    let g = grad.values();
    if g.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Dimension {
            context: "adam step",
            expected: params.len(),
            got: g.len().min(state.m.len()),
        });
    }
    if !grad.is_finite() {
        return Err(Error::Divergence { step: state.step + 1 });
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for i in 0..params.len() {
        let m = b1 * state.m[i] + (1.0 - b1) * g[i];
        let v = b2 * state.v[i] + (1.0 - b2) * g[i] * g[i];
        state.m[i] = m;
        state.v[i] = v;
        params[i] -= lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
    }
    Ok(())
}
