//! LSTM cell built from tape primitives.
//!
//! Gate layout along the `4·hidden` axis is `[input, forget, candidate,
//! output]`. Initialisation sets the forget-gate bias to 1.0.

use rand::Rng;

use crate::error::{dim_err, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// The three weight tensors of one cell, already bound to a tape.
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    /// `[input, 4·hidden]`
    pub w_ih: Var,
    /// `[hidden, 4·hidden]`
    pub w_hh: Var,
    /// `[4·hidden]`
    pub bias: Var,
}

/// Freshly initialised `(w_ih, w_hh, bias)` for a cell.
pub fn init_weights<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> (Tensor, Tensor, Tensor) {
    let bound = 1.0 / (hidden as f64).sqrt();
    let w_ih = Tensor::uniform(&[input, 4 * hidden], bound, rng);
    let w_hh = Tensor::uniform(&[hidden, 4 * hidden], bound, rng);
    let mut bias = Tensor::zeros(&[4 * hidden]);
    bias.data_mut()[hidden..2 * hidden].iter_mut().for_each(|b| *b = 1.0);
    (w_ih, w_hh, bias)
}

/// One step of the cell.
///
/// `x` is `[input]` or `[batch, input]`; `h` and `c` are `[hidden]` or
/// `[batch, hidden]` to match. Returns `(h', c')` with
/// `c' = f⊙c + i⊙g` and `h' = o⊙tanh(c')`.
pub fn lstm_step(tape: &mut Tape, x: Var, h: Var, c: Var, w: &LstmVars) -> Result<(Var, Var)> {
    let hidden = *tape.shape(h).last().unwrap();
    let w_hh_shape = tape.shape(w.w_hh);
    if w_hh_shape != [hidden, 4 * hidden] || tape.shape(w.bias) != [4 * hidden] {
        return Err(dim_err(
            "lstm_step",
            format!(
                "hidden size {hidden} with w_hh {:?}, bias {:?}",
                w_hh_shape,
                tape.shape(w.bias)
            ),
        ));
    }
    if tape.shape(c) != tape.shape(h) {
        return Err(dim_err(
            "lstm_step",
            format!("h {:?} vs c {:?}", tape.shape(h), tape.shape(c)),
        ));
    }
    let xs = tape.shape(x);
    let hs = tape.shape(h);
    if xs.len() != hs.len() || xs[..xs.len() - 1] != hs[..hs.len() - 1] {
        return Err(dim_err("lstm_step", format!("x {xs:?} vs h {hs:?}")));
    }
    let xi = tape.matmul(x, w.w_ih)?;
    let hh = tape.matmul(h, w.w_hh)?;
    let pre = tape.add(xi, hh)?;
    let gates = tape.add_broadcast(pre, w.bias)?;
    let axis = tape.shape(gates).len() - 1;
    let i_pre = tape.narrow(gates, axis, 0, hidden)?;
    let f_pre = tape.narrow(gates, axis, hidden, hidden)?;
    let g_pre = tape.narrow(gates, axis, 2 * hidden, hidden)?;
    let o_pre = tape.narrow(gates, axis, 3 * hidden, hidden)?;
    let i = tape.sigmoid(i_pre);
    let f = tape.sigmoid(f_pre);
    let g = tape.tanh(g_pre);
    let o = tape.sigmoid(o_pre);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let squashed = tape.tanh(c_next);
    let h_next = tape.mul(o, squashed)?;
    Ok((h_next, c_next))
}
