//! Frame-indexed replay memory.
//!
//! Episodes are stored as contiguous runs of state frames. A transition keeps
//! only the index of its newest frame; both trajectory views of `s` and `s'`
//! are rebuilt from the frames with the same slot pattern as
//! [`tempfuser_sim::HistoryBuffer`], so a record costs one frame instead of
//! four trajectory matrices.

use std::collections::VecDeque;

use rand::Rng;
use tempfuser_nd::Tensor;
use tempfuser_sim::{StateVector, STATE_DIM};

use crate::config::NetworkConfig;
use crate::error::{CoreError, Result};
use crate::policy::ACTION_DIM;

/// One transition with materialised views.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub s_s: Vec<f64>,
    pub s_l: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_s_s: Vec<f64>,
    pub next_s_l: Vec<f64>,
    pub done: bool,
}

/// A step's `(a, r, done)`; its states come from the episode's frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Stored {
    /// Global index of the newest frame of `s`.
    end: u64,
    step: StepRecord,
}

/// A sampled minibatch, trajectories flattened row-major per record.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub s_l: Vec<f64>,
    pub s_s: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_s_l: Vec<f64>,
    pub next_s_s: Vec<f64>,
    /// 1.0 for terminal records.
    pub done: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Replay {
    capacity: usize,
    n_s: usize,
    n_l: usize,
    stride: usize,
    frames: VecDeque<[f64; STATE_DIM]>,
    base: u64,
    records: VecDeque<Stored>,
}

impl Replay {
    pub fn new(capacity: usize, net: &NetworkConfig) -> Self {
        Self {
            capacity,
            n_s: net.n_s,
            n_l: net.n_l,
            stride: net.stride,
            frames: VecDeque::new(),
            base: 0,
            records: VecDeque::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    fn window(&self) -> usize {
        self.n_l * self.stride
    }

    /// Appends an episode. `frames` are every state pushed to the history
    /// (warm-up included); `steps[i]` is the transition out of the state whose
    /// history first became full `i` frames after warm-up, so
    /// `frames.len() == n_l·stride + steps.len()`.
    pub fn commit_episode(&mut self, frames: &[StateVector], steps: &[StepRecord]) -> Result<()> {
        let w = self.window();
        if steps.is_empty() {
            return Ok(());
        }
        if frames.len() != w + steps.len() {
            return Err(CoreError::Contract(format!(
                "{} frames cannot back {} transitions with a {w}-frame history",
                frames.len(),
                steps.len()
            )));
        }
        let first = self.base + self.frames.len() as u64;
        self.frames.extend(frames.iter().map(|f| f.0));
        for (i, step) in steps.iter().enumerate() {
            self.records.push_back(Stored {
                end: first + (w - 1 + i) as u64,
                step: *step,
            });
        }
        self.evict();
        Ok(())
    }

    fn evict(&mut self) {
        while self.records.len() > self.capacity {
            self.records.pop_front();
        }
        let keep_from = match self.records.front() {
            Some(r) => r.end + 1 - self.window() as u64,
            None => self.base + self.frames.len() as u64,
        };
        while self.base < keep_from {
            self.frames.pop_front();
            self.base += 1;
        }
    }

    fn frame(&self, global: u64) -> &[f64; STATE_DIM] {
        &self.frames[(global - self.base) as usize]
    }

    fn push_views(&self, end: u64, long: &mut Vec<f64>, short: &mut Vec<f64>) {
        let start = end + 1 - self.window() as u64;
        for k in 1..=self.n_l {
            long.extend_from_slice(self.frame(start + (k * self.stride) as u64 - 1));
        }
        for g in end + 1 - self.n_s as u64..=end {
            short.extend_from_slice(self.frame(g));
        }
    }

    /// Record `i`, oldest first, with both views materialised.
    pub fn get(&self, i: usize) -> Option<TransitionRecord> {
        let r = self.records.get(i)?;
        let (mut s_l, mut s_s, mut n_l, mut n_s) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        self.push_views(r.end, &mut s_l, &mut s_s);
        self.push_views(r.end + 1, &mut n_l, &mut n_s);
        Some(TransitionRecord {
            s_s,
            s_l,
            action: r.step.action,
            reward: r.step.reward,
            next_s_s: n_s,
            next_s_l: n_l,
            done: r.step.done,
        })
    }

    /// Uniform minibatch, with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, size: usize, rng: &mut R) -> Result<Batch> {
        if self.records.is_empty() || size == 0 {
            return Err(CoreError::Contract("cannot sample an empty batch".into()));
        }
        let indices: Vec<usize> = (0..size).map(|_| rng.gen_range(0..self.records.len())).collect();
        Ok(self.gather(&indices))
    }

    pub fn gather(&self, indices: &[usize]) -> Batch {
        let (lw, sw) = (self.n_l * STATE_DIM, self.n_s * STATE_DIM);
        let n = indices.len();
        let mut b = Batch {
            len: n,
            s_l: Vec::with_capacity(n * lw),
            s_s: Vec::with_capacity(n * sw),
            actions: Vec::with_capacity(n * ACTION_DIM),
            rewards: Vec::with_capacity(n),
            next_s_l: Vec::with_capacity(n * lw),
            next_s_s: Vec::with_capacity(n * sw),
            done: Vec::with_capacity(n),
        };
        for &i in indices {
            let r = &self.records[i];
            self.push_views(r.end, &mut b.s_l, &mut b.s_s);
            self.push_views(r.end + 1, &mut b.next_s_l, &mut b.next_s_s);
            b.actions.extend_from_slice(&r.step.action);
            b.rewards.push(r.step.reward);
            b.done.push(if r.step.done { 1.0 } else { 0.0 });
        }
        b
    }

    /// Full-precision tensors for a training snapshot.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("replay.base".to_string(), Tensor::scalar(self.base as f64))];
        if self.records.is_empty() {
            return out;
        }
        let r = self.records.len();
        let frames: Vec<f64> = self.frames.iter().flat_map(|f| f.iter().copied()).collect();
        let ends = self.records.iter().map(|s| s.end as f64).collect();
        let actions = self.records.iter().flat_map(|s| s.step.action).collect();
        let rewards = self.records.iter().map(|s| s.step.reward).collect();
        let done = self
            .records
            .iter()
            .map(|s| if s.step.done { 1.0 } else { 0.0 })
            .collect();
        let t = |shape: &[usize], data: Vec<f64>| Tensor::new(shape, data).expect("consistent replay shapes");
        out.push(("replay.frames".into(), t(&[self.frames.len(), STATE_DIM], frames)));
        out.push(("replay.ends".into(), t(&[r], ends)));
        out.push(("replay.actions".into(), t(&[r, ACTION_DIM], actions)));
        out.push(("replay.rewards".into(), t(&[r], rewards)));
        out.push(("replay.done".into(), t(&[r], done)));
        out
    }

    /// Restores contents written by [`Replay::to_tensors`].
    pub fn load_tensors(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let find = |name: &str| entries.iter().find(|(n, _)| n == name).map(|(_, t)| t);
        let base = find("replay.base").ok_or_else(|| CoreError::Checkpoint("snapshot has no replay".into()))?;
        self.frames.clear();
        self.records.clear();
        self.base = base.data()[0] as u64;
        let Some(frames) = find("replay.frames") else {
            return Ok(());
        };
        let missing = || CoreError::Checkpoint("snapshot replay is incomplete".into());
        let ends = find("replay.ends").ok_or_else(missing)?;
        let actions = find("replay.actions").ok_or_else(missing)?;
        let rewards = find("replay.rewards").ok_or_else(missing)?;
        let done = find("replay.done").ok_or_else(missing)?;
        for row in frames.data().chunks(STATE_DIM) {
            self.frames.push_back(row.try_into().expect("frame width"));
        }
        for (i, &end) in ends.data().iter().enumerate() {
            let a = &actions.data()[i * ACTION_DIM..(i + 1) * ACTION_DIM];
            self.records.push_back(Stored {
                end: end as u64,
                step: StepRecord {
                    action: a.try_into().expect("action width"),
                    reward: rewards.data()[i],
                    done: done.data()[i] != 0.0,
                },
            });
        }
        let lo = self.base;
        let hi = self.base + self.frames.len() as u64;
        let w = self.window() as u64;
        if self.records.iter().any(|r| r.end + 1 < lo + w || r.end + 1 >= hi) {
            return Err(CoreError::Checkpoint(
                "snapshot replay indices fall outside its frames".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> NetworkConfig {
        NetworkConfig {
            n_s: 4,
            n_l: 4,
            stride: 4,
            ..NetworkConfig::default()
        }
    }

    fn tagged(v: f64) -> StateVector {
        StateVector([v; STATE_DIM])
    }

    fn step(r: f64) -> StepRecord {
        StepRecord {
            action: [r; 4],
            reward: r,
            done: false,
        }
    }

    fn column(view: &[f64]) -> Vec<f64> {
        view.chunks(STATE_DIM).map(|r| r[0]).collect()
    }

    #[test]
    fn first_record_reproduces_the_toy_views() {
        let mut rp = Replay::new(100, &net());
        let frames: Vec<_> = (1..=18).map(|i| tagged(i as f64)).collect();
        rp.commit_episode(&frames, &[step(0.0), step(1.0)]).unwrap();
        let r = rp.get(0).unwrap();
        assert_eq!(column(&r.s_l), vec![4.0, 8.0, 12.0, 16.0]);
        assert_eq!(column(&r.s_s), vec![13.0, 14.0, 15.0, 16.0]);
        assert_eq!(column(&r.next_s_l), vec![5.0, 9.0, 13.0, 17.0]);
        assert_eq!(rp.get(1).unwrap().s_s, r.next_s_s);
    }

    #[test]
    fn frame_count_must_match() {
        let mut rp = Replay::new(100, &net());
        let frames: Vec<_> = (0..17).map(|i| tagged(i as f64)).collect();
        assert!(rp.commit_episode(&frames, &[step(0.0), step(1.0)]).is_err());
    }

    #[test]
    fn eviction_is_fifo_and_drops_unused_frames() {
        let mut rp = Replay::new(5, &net());
        for ep in 0..4 {
            let frames: Vec<_> = (0..19).map(|i| tagged((ep * 100 + i) as f64)).collect();
            let steps: Vec<_> = (0..3).map(|i| step((ep * 10 + i) as f64)).collect();
            rp.commit_episode(&frames, &steps).unwrap();
            assert!(rp.len() <= 5);
        }
        let rewards: Vec<f64> = (0..rp.len()).map(|i| rp.get(i).unwrap().reward).collect();
        assert_eq!(rewards, vec![21.0, 22.0, 30.0, 31.0, 32.0]);
        // the oldest surviving record still sees its own episode's frames
        assert_eq!(column(&rp.get(0).unwrap().s_s), vec![213.0, 214.0, 215.0, 216.0]);
        assert!(rp.frame_count() <= 2 * 19);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut rp = Replay::new(7, &net());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ep in 0..3 {
            let frames: Vec<_> = (0..20)
                .map(|_| StateVector(std::array::from_fn(|_| rng.gen())))
                .collect();
            let steps: Vec<_> = (0..4)
                .map(|i| StepRecord {
                    action: std::array::from_fn(|_| rng.gen()),
                    reward: rng.gen(),
                    done: i == 3 && ep == 1,
                })
                .collect();
            rp.commit_episode(&frames, &steps).unwrap();
        }
        let mut back = Replay::new(7, &net());
        back.load_tensors(&rp.to_tensors()).unwrap();
        let idx: Vec<usize> = (0..rp.len()).collect();
        assert_eq!(back.gather(&idx), rp.gather(&idx));
        assert_eq!(back.len(), 7);
    }

    #[test]
    fn empty_sampling_is_an_error() {
        let rp = Replay::new(7, &net());
        assert!(rp.sample(4, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
