//! Adam and the cosine-annealed learning rate.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::loss::Gradients;
use crate::math::sqrt;
use crate::net::OffsetNet;

pub const DEFAULT_LR: f64 = 0.001;

/// First/second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of steps taken.
    pub t: u64,
}

impl AdamState {
    /// Standard hyper-parameters: beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
    pub fn new(param_count: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; param_count], v: vec![0.0; param_count], t: 0 }
    }
}

/// One bias-corrected Adam update of `net` in place.
pub fn adam_step(net: &mut OffsetNet, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    let n = net.param_count();
    for (what, len) in [("gradients", grads.0.len()), ("adam first moment", state.m.len()), ("adam second moment", state.v.len())] {
        if len != n {
            return Err(Error::LengthMismatch { what, expected: n, found: len });
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - libm::pow(state.beta1, t);
    let bc2 = 1.0 - libm::pow(state.beta2, t);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    for (((p, &g), m), v) in net.params_mut().iter_mut().zip(&grads.0).zip(&mut state.m).zip(&mut state.v) {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        *p -= lr * (*m / bc1) / (sqrt(*v / bc2) + eps);
    }
    net.check_finite()
}

/// `0.5 * lr0 * (1 + cos(pi * t / total))`, annealing from `lr0` at `t = 0`
/// to 0 at `t = total`.
pub fn cosine_lr(t: u64, total: u64, lr0: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("schedule length", "total steps must be positive"));
    }
    if t > total {
        return Err(Error::invalid("schedule step", "step exceeds total steps"));
    }
    Ok(0.5 * lr0 * (1.0 + libm::cos(core::f64::consts::PI * t as f64 / total as f64)))
}
