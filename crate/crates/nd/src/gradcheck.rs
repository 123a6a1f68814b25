//! Central finite-difference gradient checking.
//!
//! The numeric side only ever evaluates forward values, so it is independent
//! of the adjoint code it is checking.

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Perturbation used by the checks.
pub const STEP: f64 = 1e-6;
/// Relative tolerance the checks are held to.
pub const REL_TOL: f64 = 1e-4;
/// Gradient magnitudes below this are compared on an absolute scale; the
/// round-off of a central difference at `STEP` sits far below it.
pub const MAGNITUDE_FLOOR: f64 = 1e-5;

/// `|a − n| / max(|a|, |n|, MAGNITUDE_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Central difference of `f` at `x`, one coordinate at a time.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + h;
            let up = f(&probe);
            probe[i] = orig - h;
            let down = f(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GradReport {
    pub input: usize,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

impl GradReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_err <= tol
    }
}

/// Compares tape gradients of a scalar loss against central differences for
/// every element of every input.
///
/// `build` receives a fresh tape and the inputs bound as trainable leaves and
/// must return the scalar loss. `max_per_input` caps how many coordinates
/// per input are probed (evenly strided) to bound the cost on large inputs.
pub fn check<F>(inputs: &[Tensor], build: F, h: f64, max_per_input: usize) -> Result<Vec<GradReport>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .map(|t| tape.leaf(&t.clone().with_requires_grad(true)))
        .collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| {
            tape.grad(v)
                .map(<[f64]>::to_vec)
                .unwrap_or_else(|| vec![0.0; t.numel()])
        })
        .collect();

    let eval = |values: &[Tensor]| -> Result<f64> {
        let mut t = Tape::new();
        let vs: Vec<Var> = values.iter().map(|x| t.leaf(x)).collect();
        let l = build(&mut t, &vs)?;
        Ok(t.value(l)[0])
    };

    let mut reports = Vec::with_capacity(inputs.len());
    let mut probe: Vec<Tensor> = inputs.iter().map(|t| t.clone().with_requires_grad(false)).collect();
    for (idx, input) in inputs.iter().enumerate() {
        let n = input.numel();
        let stride = n.div_ceil(max_per_input.max(1)).max(1);
        let mut report = GradReport {
            input: idx,
            checked: 0,
            max_rel_err: 0.0,
            worst_index: 0,
        };
        for e in (0..n).step_by(stride) {
            let orig = probe[idx].data()[e];
            probe[idx].data_mut()[e] = orig + h;
            let up = eval(&probe)?;
            probe[idx].data_mut()[e] = orig - h;
            let down = eval(&probe)?;
            probe[idx].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic[idx][e], numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.checked == 1 {
                report.max_rel_err = err;
                report.worst_index = e;
            }
        }
        reports.push(report);
    }
    Ok(reports)
}
