//! Minimal dense tensor library with reverse-mode automatic differentiation.
//!
//! Values live in flat row-major `f64` buffers. A [`Tape`] records every
//! operation of a forward pass; [`Tape::backward`] replays it in reverse and
//! accumulates gradients on the leaves. Parameters are held in a [`ParamSet`]
//! and bound onto a fresh tape for each forward pass.

mod error;
mod kernels;
mod ops;
mod tape;
mod tensor;

pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod optim;
pub mod params;

pub use error::{NdError, Result};
pub use lstm::{lstm_step, LstmVars};
pub use optim::{Adam, AdamState};
pub use params::ParamSet;
pub use tape::{Tape, Var};
pub use tensor::Tensor;
