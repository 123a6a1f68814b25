//! Named parameter collections.

use crate::error::{NdError, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Ordered, named set of trainable tensors.
///
/// Networks record the index of each of their weights at construction time
/// and look the bound [`Var`]s up by that index after [`ParamSet::bind`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a parameter and returns its index. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        let name = name.into();
        assert!(!self.names.contains(&name), "duplicate parameter name {name}");
        self.names.push(name);
        self.tensors.push(tensor.with_requires_grad(true));
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    /// `(name, shape)` pairs in insertion order.
    pub fn manifest(&self) -> Vec<(String, Vec<usize>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect()
    }

    /// Records every tensor as a leaf of `tape`. With `trainable == false`
    /// the leaves are constants and backward never reaches them.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    tape.leaf(t)
                } else {
                    tape.constant(t.shape(), t.data().to_vec())
                        .expect("parameter shapes are valid")
                }
            })
            .collect()
    }

    /// Adds the tape gradients of `vars` (as returned by `bind`) into the
    /// tensors' gradient buffers.
    pub fn accumulate_grads(&mut self, tape: &Tape, vars: &[Var]) -> Result<()> {
        if vars.len() != self.tensors.len() {
            return Err(NdError::Contract(format!(
                "{} bound vars for {} parameters",
                vars.len(),
                self.tensors.len()
            )));
        }
        for (t, &v) in self.tensors.iter_mut().zip(vars) {
            if let Some(g) = tape.grad(v) {
                t.accumulate_grad(g)?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Global L2 norm of the stored gradients.
    pub fn grad_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter_map(|t| t.grad())
            .flat_map(|g| g.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Rescales gradients so their global norm is at most `max_norm`.
    pub fn clip_grad_norm(&mut self, max_norm: f64) -> f64 {
        let norm = self.grad_norm();
        if norm > max_norm && norm > 0.0 {
            let s = max_norm / norm;
            for t in &mut self.tensors {
                if let Some(g) = t.grad() {
                    let scaled: Vec<f64> = g.iter().map(|v| v * (s - 1.0)).collect();
                    t.accumulate_grad(&scaled).expect("same length");
                }
            }
        }
        norm
    }

    fn check_manifest(&self, other: &ParamSet) -> Result<()> {
        if self.manifest() != other.manifest() {
            return Err(NdError::Contract(format!(
                "parameter manifests differ: {}",
                manifest_diff(&self.manifest(), &other.manifest()).join("; ")
            )));
        }
        Ok(())
    }

    /// `self ← tau·source + (1 − tau)·self`, elementwise.
    pub fn polyak_from(&mut self, source: &ParamSet, tau: f64) -> Result<()> {
        self.check_manifest(source)?;
        for (dst, src) in self.tensors.iter_mut().zip(&source.tensors) {
            for (d, s) in dst.data_mut().iter_mut().zip(src.data()) {
                *d = tau * s + (1.0 - tau) * *d;
            }
        }
        Ok(())
    }

    pub fn copy_from(&mut self, source: &ParamSet) -> Result<()> {
        self.check_manifest(source)?;
        for (dst, src) in self.tensors.iter_mut().zip(&source.tensors) {
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }

    /// Replaces values from `(name, tensor)` pairs, which must match this
    /// set's manifest exactly (any order).
    pub fn load_named(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let found: Vec<(String, Vec<usize>)> = entries.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
        let mut want = self.manifest();
        let mut got = found.clone();
        want.sort();
        got.sort();
        if want != got {
            return Err(NdError::Format(format!(
                "checkpoint does not match the expected parameters: {}",
                manifest_diff(&self.manifest(), &found).join("; ")
            )));
        }
        for (name, t) in entries {
            let i = self.names.iter().position(|n| n == name).expect("checked above");
            self.tensors[i].data_mut().copy_from_slice(t.data());
        }
        Ok(())
    }
}

/// Human-readable differences between an expected and a found manifest.
pub fn manifest_diff(expected: &[(String, Vec<usize>)], found: &[(String, Vec<usize>)]) -> Vec<String> {
    let mut out = Vec::new();
    for (name, shape) in expected {
        match found.iter().find(|(n, _)| n == name) {
            None => out.push(format!("missing {name} {shape:?}")),
            Some((_, s)) if s != shape => out.push(format!("{name}: expected {shape:?}, found {s:?}")),
            _ => {}
        }
    }
    for (name, shape) in found {
        if !expected.iter().any(|(n, _)| n == name) {
            out.push(format!("unexpected {name} {shape:?}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[f64]) -> ParamSet {
        let mut p = ParamSet::new();
        p.add("w", Tensor::new(&[values.len()], values.to_vec()).unwrap());
        p
    }

    #[test]
    fn polyak_extremes_and_midpoint() {
        let src = set(&[2.0, 4.0]);
        let mut dst = set(&[0.0, 0.0]);
        dst.polyak_from(&src, 0.0).unwrap();
        assert_eq!(dst.tensors()[0].data(), &[0.0, 0.0]);
        dst.polyak_from(&src, 0.5).unwrap();
        assert_eq!(dst.tensors()[0].data(), &[1.0, 2.0]);
        dst.polyak_from(&src, 1.0).unwrap();
        assert_eq!(dst.tensors()[0].data(), src.tensors()[0].data());
    }

    #[test]
    fn polyak_rejects_manifest_mismatch() {
        let src = set(&[1.0, 2.0, 3.0]);
        let mut dst = set(&[0.0, 0.0]);
        assert!(dst.polyak_from(&src, 0.5).is_err());
    }

    #[test]
    fn load_named_reports_differences() {
        let mut p = set(&[0.0, 0.0]);
        let err = p
            .load_named(&[("v".to_string(), Tensor::zeros(&[2]))])
            .unwrap_err()
            .to_string();
        assert!(err.contains("missing w") && err.contains("unexpected v"), "{err}");
    }

    #[test]
    fn clipping_caps_global_norm() {
        let mut p = set(&[0.0, 0.0]);
        p.tensors_mut()[0].accumulate_grad(&[3.0, 4.0]).unwrap();
        assert_eq!(p.clip_grad_norm(1.0), 5.0);
        assert!((p.grad_norm() - 1.0).abs() < 1e-12);
    }
}
