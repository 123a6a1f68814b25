//! Adam over a [`ParamSet`].

use crate::error::{NdError, Result};
use crate::params::ParamSet;

/// Moment buffers, exposed so trainers can snapshot and restore them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    state: AdamState,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            state: AdamState {
                step: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
        }
    }

    pub fn state(&self) -> &AdamState {
        &self.state
    }

    pub fn set_state(&mut self, state: AdamState) {
        self.state = state;
    }

    /// One update from the accumulated gradients; clears them afterwards.
    /// Tensors without a gradient are left untouched.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if self.state.m.is_empty() {
            self.state.m = params.tensors().iter().map(|t| vec![0.0; t.numel()]).collect();
            self.state.v = self.state.m.clone();
        }
        if self.state.m.len() != params.len() {
            return Err(NdError::Contract(format!(
                "optimizer tracks {} tensors, parameter set has {}",
                self.state.m.len(),
                params.len()
            )));
        }
        self.state.step += 1;
        let t = self.state.step as f64;
        let bc1 = 1.0 - self.beta1.powf(t);
        let bc2 = 1.0 - self.beta2.powf(t);
        for ((tensor, m), v) in params
            .tensors_mut()
            .iter_mut()
            .zip(&mut self.state.m)
            .zip(&mut self.state.v)
        {
            let Some(g) = tensor.grad().map(<[f64]>::to_vec) else {
                continue;
            };
            for (((w, gi), mi), vi) in tensor.data_mut().iter_mut().zip(&g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        params.zero_grad();
        Ok(())
    }
}
