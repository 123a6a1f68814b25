//! Twin Q-function: the actor's input pipelines, terminal hidden states and
//! the action fed through a ReLU residual block.
//!
//! Wiring: `[h_l; h_s; a] → linear → ReLU → (linear → ReLU → linear) + skip
//! → ReLU → linear → Q`.

use rand::Rng;
use tempfuser_nd::{ParamSet, Tape, Var};

use crate::config::NetworkConfig;
use crate::error::{CoreError, Result};
use crate::layers::{Linear, Pipeline};
use crate::policy::ACTION_DIM;

#[derive(Debug, Clone)]
pub struct Critic {
    cfg: NetworkConfig,
    params: ParamSet,
    long: Pipeline,
    short: Pipeline,
    input: Linear,
    res1: Linear,
    res2: Linear,
    out: Linear,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d;
        let mut params = ParamSet::new();
        let long = Pipeline::new(&mut params, "long", NetworkConfig::INPUT_DIM, d, rng);
        let short = Pipeline::new(&mut params, "short", NetworkConfig::INPUT_DIM, d, rng);
        let input = Linear::new(&mut params, "input", 2 * d + ACTION_DIM, d, rng);
        let res1 = Linear::new(&mut params, "res1", d, d, rng);
        let res2 = Linear::new(&mut params, "res2", d, d, rng);
        let out = Linear::new(&mut params, "out", d, 1, rng);
        Ok(Self {
            cfg: cfg.clone(),
            params,
            long,
            short,
            input,
            res1,
            res2,
            out,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// `Q(s_l, s_s, a)` for a batch: `[B, n_l, 33]`, `[B, n_s, 33]`, `[B, 4]`
    /// to `[B]`.
    pub fn q_value(&self, tape: &mut Tape, vars: &[Var], s_l: Var, s_s: Var, action: Var) -> Result<Var> {
        let batch = tape.shape(s_l)[0];
        let expect = [
            (s_l, vec![batch, self.cfg.n_l, NetworkConfig::INPUT_DIM]),
            (s_s, vec![batch, self.cfg.n_s, NetworkConfig::INPUT_DIM]),
            (action, vec![batch, ACTION_DIM]),
        ];
        for (v, shape) in expect {
            if tape.shape(v) != shape.as_slice() {
                return Err(CoreError::Nd(tempfuser_nd::NdError::Dimension {
                    op: "q_value",
                    detail: format!("expected {shape:?}, got {:?}", tape.shape(v)),
                }));
            }
        }
        let h_l = self.long.scan(tape, vars, s_l, false)?;
        let h_s = self.short.scan(tape, vars, s_s, false)?;
        let x = tape.concat(&[h_l, h_s, action], 1)?;
        let z = self.input.apply(tape, vars, x)?;
        let z = tape.relu(z);
        let r = self.res1.apply(tape, vars, z)?;
        let r = tape.relu(r);
        let r = self.res2.apply(tape, vars, r)?;
        let h = tape.add(z, r)?;
        let h = tape.relu(h);
        let q = self.out.apply(tape, vars, h)?;
        Ok(tape.reshape(q, &[batch])?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> NetworkConfig {
        NetworkConfig {
            d: 6,
            heads: 2,
            n_s: 2,
            n_l: 3,
            stride: 2,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn zero_weights_give_zero_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut critic = Critic::new(&cfg(), &mut rng).unwrap();
        critic
            .params_mut()
            .tensors_mut()
            .iter_mut()
            .for_each(|t| t.data_mut().iter_mut().for_each(|v| *v = 0.0));
        let mut tape = Tape::new();
        let vars = critic.params().bind(&mut tape, false);
        let l = tape
            .constant(&[2, 3, 33], (0..198).map(|i| (i as f64).sin()).collect())
            .unwrap();
        let s = tape
            .constant(&[2, 2, 33], (0..132).map(|i| (i as f64).cos()).collect())
            .unwrap();
        let a = tape
            .constant(&[2, 4], vec![0.5, -0.2, 0.9, 0.0, 0.1, 0.1, -0.7, 0.3])
            .unwrap();
        let q = critic.q_value(&mut tape, &vars, l, s, a).unwrap();
        assert_eq!(tape.value(q), &[0.0, 0.0]);
    }

    #[test]
    fn owns_no_transformer_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let critic = Critic::new(&cfg(), &mut rng).unwrap();
        assert!(critic
            .params()
            .names()
            .iter()
            .all(|n| !n.contains("encoder") && !n.contains("token") && !n.contains("pos_")));
        assert_eq!(critic.params().get("input.weight").unwrap().shape(), &[16, 6]);
    }

    #[test]
    fn action_shape_is_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let critic = Critic::new(&cfg(), &mut rng).unwrap();
        let mut tape = Tape::new();
        let vars = critic.params().bind(&mut tape, false);
        let l = tape.constant(&[1, 3, 33], vec![0.0; 99]).unwrap();
        let s = tape.constant(&[1, 2, 33], vec![0.0; 66]).unwrap();
        let a = tape.constant(&[1, 3], vec![0.0; 3]).unwrap();
        assert!(critic.q_value(&mut tape, &vars, l, s, a).is_err());
    }
}
