//! Parameter-index handles for the building blocks shared by actor and critic.
//!
//! A network registers its tensors in a [`ParamSet`] at construction and keeps
//! only their indices; a forward pass receives the bound [`Var`]s.

use rand::Rng;
use tempfuser_nd::{lstm, lstm_step, LstmVars, ParamSet, Tape, Tensor, Var};

use crate::error::Result;

pub(crate) const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Linear {
    w: usize,
    b: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        Self {
            w: params.add(
                format!("{name}.weight"),
                Tensor::uniform(&[fan_in, fan_out], bound, rng),
            ),
            b: params.add(format!("{name}.bias"), Tensor::zeros(&[fan_out])),
        }
    }

    pub fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let y = tape.matmul(x, vars[self.w])?;
        Ok(tape.add_broadcast(y, vars[self.b])?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Norm {
    gain: usize,
    bias: usize,
}

impl Norm {
    pub fn new(params: &mut ParamSet, name: &str, width: usize) -> Self {
        Self {
            gain: params.add(format!("{name}.gain"), Tensor::full(&[width], 1.0)),
            bias: params.add(format!("{name}.bias"), Tensor::zeros(&[width])),
        }
    }

    pub fn apply(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        Ok(tape.layer_norm(x, vars[self.gain], vars[self.bias], LN_EPS)?)
    }
}

/// Linear + ReLU input projection followed by an LSTM scan from zero state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Pipeline {
    proj: Linear,
    w_ih: usize,
    w_hh: usize,
    bias: usize,
    d: usize,
}

impl Pipeline {
    pub fn new<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, input: usize, d: usize, rng: &mut R) -> Self {
        let proj = Linear::new(params, &format!("{name}.proj"), input, d, rng);
        let (w_ih, w_hh, bias) = lstm::init_weights(d, d, rng);
        Self {
            proj,
            w_ih: params.add(format!("{name}.lstm.w_ih"), w_ih),
            w_hh: params.add(format!("{name}.lstm.w_hh"), w_hh),
            bias: params.add(format!("{name}.lstm.bias"), bias),
            d,
        }
    }

    /// `traj: [B, n, input]`. Returns every hidden output stacked as
    /// `[B, n, d]` when `all` is set, otherwise the last one as `[B, d]`.
    pub fn scan(&self, tape: &mut Tape, vars: &[Var], traj: Var, all: bool) -> Result<Var> {
        let (batch, n) = (tape.shape(traj)[0], tape.shape(traj)[1]);
        let x = self.proj.apply(tape, vars, traj)?;
        let x = tape.relu(x);
        let cell = LstmVars {
            w_ih: vars[self.w_ih],
            w_hh: vars[self.w_hh],
            bias: vars[self.bias],
        };
        let mut h = tape.constant(&[batch, self.d], vec![0.0; batch * self.d])?;
        let mut c = h;
        let mut outputs = Vec::with_capacity(if all { n } else { 0 });
        for t in 0..n {
            let row = tape.narrow(x, 1, t, 1)?;
            let row = tape.reshape(row, &[batch, self.d])?;
            (h, c) = lstm_step(tape, row, h, c, &cell)?;
            if all {
                outputs.push(tape.reshape(h, &[batch, 1, self.d])?);
            }
        }
        if all {
            Ok(tape.concat(&outputs, 1)?)
        } else {
            Ok(h)
        }
    }
}

/// Row-major batch of equally shaped matrices as a constant `[B, rows, cols]`.
pub(crate) fn stack_constant(tape: &mut Tape, rows: usize, cols: usize, data: Vec<f64>) -> Result<Var> {
    let batch = data.len() / (rows * cols).max(1);
    Ok(tape.constant(&[batch, rows, cols], data)?)
}
