//! FIFO state history and the dense/sparse trajectory views.

use std::collections::VecDeque;

use crate::error::{Result, SimError};
use crate::state::{StateVector, STATE_DIM};

#[derive(Debug, Clone)]
pub struct HistoryBuffer {
    n_s: usize,
    n_l: usize,
    stride: usize,
    entries: VecDeque<StateVector>,
}

impl HistoryBuffer {
    /// Capacity is `n_l * stride`; the short view must fit inside it.
    pub fn new(n_s: usize, n_l: usize, stride: usize) -> Result<Self> {
        if n_s == 0 || n_l == 0 || stride == 0 {
            return Err(SimError::Config(
                "trajectory lengths and stride must be positive".into(),
            ));
        }
        if n_s > n_l * stride {
            return Err(SimError::Config(format!(
                "short trajectory ({n_s}) longer than history capacity ({})",
                n_l * stride
            )));
        }
        Ok(Self {
            n_s,
            n_l,
            stride,
            entries: VecDeque::with_capacity(n_l * stride),
        })
    }

    pub fn capacity(&self) -> usize {
        self.n_l * self.stride
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity()
    }

    pub fn short_len(&self) -> usize {
        self.n_s
    }

    pub fn long_len(&self) -> usize {
        self.n_l
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn push(&mut self, x: StateVector) {
        if self.is_full() {
            self.entries.pop_front();
        }
        self.entries.push_back(x);
    }

    pub fn newest(&self) -> Option<&StateVector> {
        self.entries.back()
    }

    fn ready(&self) -> Result<()> {
        if self.is_full() {
            Ok(())
        } else {
            Err(SimError::WarmUp {
                have: self.len(),
                need: self.capacity(),
            })
        }
    }

    fn gather(&self, rows: impl Iterator<Item = usize>, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n * STATE_DIM);
        for i in rows {
            out.extend_from_slice(&self.entries[i].0);
        }
        out
    }

    /// The last `n_s` states, oldest first, row-major `n_s × 33`.
    pub fn short_view(&self) -> Result<Vec<f64>> {
        self.ready()?;
        let cap = self.capacity();
        Ok(self.gather(cap - self.n_s..cap, self.n_s))
    }

    /// Slots `stride, 2·stride, …, n_l·stride` (1-based), oldest first,
    /// row-major `n_l × 33`. The last row is the newest state.
    pub fn long_view(&self) -> Result<Vec<f64>> {
        self.ready()?;
        Ok(self.gather((1..=self.n_l).map(|k| k * self.stride - 1), self.n_l))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tagged(v: f64) -> StateVector {
        StateVector([v; STATE_DIM])
    }

    fn column(view: &[f64]) -> Vec<f64> {
        view.chunks(STATE_DIM).map(|r| r[0]).collect()
    }

    #[test]
    fn toy_case_matches_the_figure() {
        let mut b = HistoryBuffer::new(4, 4, 4).unwrap();
        for i in 1..=16 {
            b.push(tagged(i as f64));
        }
        assert_eq!(column(&b.long_view().unwrap()), vec![4.0, 8.0, 12.0, 16.0]);
        assert_eq!(column(&b.short_view().unwrap()), vec![13.0, 14.0, 15.0, 16.0]);
    }

    #[test]
    fn full_buffer_keeps_its_size() {
        let mut b = HistoryBuffer::new(2, 2, 3).unwrap();
        for i in 0..20 {
            b.push(tagged(i as f64));
            assert!(b.len() <= 6);
            assert_eq!(b.newest().unwrap().0[0], i as f64);
        }
        assert_eq!(b.len(), 6);
    }

    #[test]
    fn views_before_warm_up_fail() {
        let mut b = HistoryBuffer::new(2, 2, 2).unwrap();
        b.push(tagged(1.0));
        assert!(matches!(b.short_view(), Err(SimError::WarmUp { have: 1, need: 4 })));
    }

    #[test]
    fn unit_stride_views_coincide() {
        let mut b = HistoryBuffer::new(5, 5, 1).unwrap();
        for i in 0..9 {
            b.push(tagged(i as f64));
        }
        assert_eq!(b.short_view().unwrap(), b.long_view().unwrap());
    }

    #[test]
    fn oversize_short_view_is_rejected() {
        assert!(HistoryBuffer::new(9, 2, 4).is_err());
    }
}
