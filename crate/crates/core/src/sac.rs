//! Soft actor-critic over trajectory pairs: rollouts, the three losses and
//! target averaging.
//!
//! Loss forms follow the standard SAC formulation:
//!
//! ```text
//! y     = r + γ (1 − done) (min_j Q̄_j(s', a') − α log π(a'|s')),  a' ~ π(·|s')
//! J_Q   = mean (Q_i(s, a) − y)²
//! J_π   = mean (α log π(ã|s) − min_j Q_j(s, ã)),                 ã ~ π(·|s) reparameterized
//! J_α   = mean (−log α · (log π(ã|s) + H̄))
//! ```

use rand::Rng;
use tempfuser_nd::{Adam, AdamState, ParamSet, Tape, Tensor};
use tempfuser_sim::{ControlCommand, HistoryBuffer, StateVector};

use crate::config::{NetworkConfig, TrainerConfig};
use crate::critic::Critic;
use crate::env::{EnvStep, Environment};
use crate::error::{CoreError, Result};
use crate::policy::{squash_sample, standard_normal, views, Actor, ACTION_DIM};
use crate::replay::{Batch, Replay, StepRecord};

/// Action flown during warm-up: neutral controls, half throttle.
pub fn initial_action() -> ControlCommand {
    ControlCommand::neutral()
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UpdateStats {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub pi_loss: f64,
    pub alpha: f64,
    pub mean_log_prob: f64,
}

/// Actor, twin critics with their targets, temperature and optimizers.
#[derive(Debug, Clone)]
pub struct Agent {
    pub actor: Actor,
    pub critics: [Critic; 2],
    pub targets: [Critic; 2],
    log_alpha: ParamSet,
    opt_actor: Adam,
    opt_critics: [Adam; 2],
    opt_alpha: Adam,
    cfg: TrainerConfig,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(net: &NetworkConfig, cfg: &TrainerConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let actor = Actor::new(net, rng)?;
        let critics = [Critic::new(net, rng)?, Critic::new(net, rng)?];
        let targets = critics.clone();
        let mut log_alpha = ParamSet::new();
        log_alpha.add("log_alpha", Tensor::scalar(cfg.init_alpha.ln()));
        Ok(Self {
            actor,
            critics,
            targets,
            log_alpha,
            opt_actor: Adam::new(cfg.lr_pi),
            opt_critics: [Adam::new(cfg.lr_q), Adam::new(cfg.lr_q)],
            opt_alpha: Adam::new(cfg.lr_alpha),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.tensors()[0].data()[0].exp()
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha.tensors()[0].data()[0]
    }

    pub fn set_log_alpha(&mut self, v: f64) {
        self.log_alpha.tensors_mut()[0].data_mut()[0] = v;
    }

    /// Bootstrapped critic targets `y` for a batch, with fresh next actions.
    pub fn critic_targets<R: Rng + ?Sized>(&self, batch: &Batch, rng: &mut R) -> Result<Vec<f64>> {
        check_batch(batch)?;
        let mut tape = Tape::new();
        let a_vars = self.actor.params().bind(&mut tape, false);
        let (l, s) = self.actor.trajectories(&mut tape, &batch.next_s_l, &batch.next_s_s)?;
        let (mu, log_std) = self.actor.forward(&mut tape, &a_vars, l, s)?;
        let xi = noise(&mut tape, batch.len, rng)?;
        let (next_a, log_prob) = squash_sample(&mut tape, mu, log_std, xi)?;
        let mut q = [Vec::new(), Vec::new()];
        for (j, target) in self.targets.iter().enumerate() {
            let vars = target.params().bind(&mut tape, false);
            let v = target.q_value(&mut tape, &vars, l, s, next_a)?;
            q[j] = tape.value(v).to_vec();
        }
        Ok(td_targets(
            &batch.rewards,
            &batch.done,
            self.cfg.gamma,
            &q[0],
            &q[1],
            self.alpha(),
            tape.value(log_prob),
        ))
    }

    /// One gradient step on each critic toward shared targets. Returns the
    /// two pre-step losses.
    pub fn critic_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<(f64, f64)> {
        let y = self.critic_targets(batch, rng)?;
        let mut losses = [0.0; 2];
        for i in 0..2 {
            let critic = &mut self.critics[i];
            let mut tape = Tape::new();
            let vars = critic.params().bind(&mut tape, true);
            let (l, s) = self.actor.trajectories(&mut tape, &batch.s_l, &batch.s_s)?;
            let a = tape.constant(&[batch.len, ACTION_DIM], batch.actions.clone())?;
            let q = critic.q_value(&mut tape, &vars, l, s, a)?;
            let target = tape.constant(&[batch.len], y.clone())?;
            let err = tape.sub(q, target)?;
            let sq = tape.square(err);
            let loss = tape.mean(sq);
            tape.backward(loss)?;
            losses[i] = tape.value(loss)[0];
            critic.params_mut().accumulate_grads(&tape, &vars)?;
            if let Some(max) = self.cfg.max_grad_norm {
                critic.params_mut().clip_grad_norm(max);
            }
            self.opt_critics[i].step(critic.params_mut())?;
        }
        Ok((losses[0], losses[1]))
    }

    /// One gradient step on the actor through reparameterized samples; the
    /// critics enter as constants. Returns the loss and per-record log π.
    pub fn actor_update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<(f64, Vec<f64>)> {
        check_batch(batch)?;
        let alpha = self.alpha();
        let mut tape = Tape::new();
        let vars = self.actor.params().bind(&mut tape, true);
        let (l, s) = self.actor.trajectories(&mut tape, &batch.s_l, &batch.s_s)?;
        let (mu, log_std) = self.actor.forward(&mut tape, &vars, l, s)?;
        let xi = noise(&mut tape, batch.len, rng)?;
        let (a, log_prob) = squash_sample(&mut tape, mu, log_std, xi)?;
        let mut qs = Vec::with_capacity(2);
        for critic in &self.critics {
            let cv = critic.params().bind(&mut tape, false);
            qs.push(critic.q_value(&mut tape, &cv, l, s, a)?);
        }
        let min_q = tape.minimum(qs[0], qs[1])?;
        let scaled = tape.scale(log_prob, alpha);
        let per_record = tape.sub(scaled, min_q)?;
        let loss = tape.mean(per_record);
        tape.backward(loss)?;
        self.actor.params_mut().accumulate_grads(&tape, &vars)?;
        if let Some(max) = self.cfg.max_grad_norm {
            self.actor.params_mut().clip_grad_norm(max);
        }
        self.opt_actor.step(self.actor.params_mut())?;
        Ok((tape.value(loss)[0], tape.value(log_prob).to_vec()))
    }

    /// One step on log α from the log-probabilities of fresh policy samples.
    pub fn temperature_update(&mut self, log_probs: &[f64]) -> Result<f64> {
        if log_probs.is_empty() {
            return Err(CoreError::Contract("temperature update needs samples".into()));
        }
        let h = self.cfg.target_entropy();
        // ∂J_α/∂log α = −mean(log π + H̄)
        let grad = -log_probs.iter().map(|lp| lp + h).sum::<f64>() / log_probs.len() as f64;
        self.log_alpha.tensors_mut()[0].accumulate_grad(&[grad])?;
        self.opt_alpha.step(&mut self.log_alpha)?;
        Ok(self.alpha())
    }

    /// `θ̄ ← τ θ + (1 − τ) θ̄` for both targets.
    pub fn polyak_update(&mut self) -> Result<()> {
        polyak(&mut self.targets, &self.critics, self.cfg.tau)
    }

    /// Critic, actor and temperature steps, then target averaging.
    pub fn update<R: Rng + ?Sized>(&mut self, batch: &Batch, rng: &mut R) -> Result<UpdateStats> {
        let (q1_loss, q2_loss) = self.critic_update(batch, rng)?;
        let (pi_loss, log_probs) = self.actor_update(batch, rng)?;
        let alpha = self.temperature_update(&log_probs)?;
        self.polyak_update()?;
        Ok(UpdateStats {
            q1_loss,
            q2_loss,
            pi_loss,
            alpha,
            mean_log_prob: log_probs.iter().sum::<f64>() / log_probs.len() as f64,
        })
    }

    /// Every parameter and optimizer moment, for snapshots.
    pub fn to_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut push_set = |prefix: &str, p: &ParamSet| {
            for (n, t) in p.names().iter().zip(p.tensors()) {
                out.push((format!("{prefix}.{n}"), t.clone()));
            }
        };
        push_set("actor", self.actor.params());
        push_set("critic1", self.critics[0].params());
        push_set("critic2", self.critics[1].params());
        push_set("target1", self.targets[0].params());
        push_set("target2", self.targets[1].params());
        push_set("temperature", &self.log_alpha);
        for (name, opt) in self.optimizers() {
            out.extend(adam_tensors(name, opt.state()));
        }
        out
    }

    fn optimizers(&self) -> [(&'static str, &Adam); 4] {
        [
            ("adam_actor", &self.opt_actor),
            ("adam_critic1", &self.opt_critics[0]),
            ("adam_critic2", &self.opt_critics[1]),
            ("adam_alpha", &self.opt_alpha),
        ]
    }

    /// Restores a snapshot written by [`Agent::to_tensors`].
    pub fn load_tensors(&mut self, entries: &[(String, Tensor)]) -> Result<()> {
        let subset = |prefix: &str| -> Vec<(String, Tensor)> {
            let p = format!("{prefix}.");
            entries
                .iter()
                .filter_map(|(n, t)| n.strip_prefix(&p).map(|rest| (rest.to_string(), t.clone())))
                .collect()
        };
        self.actor.params_mut().load_named(&subset("actor"))?;
        self.critics[0].params_mut().load_named(&subset("critic1"))?;
        self.critics[1].params_mut().load_named(&subset("critic2"))?;
        self.targets[0].params_mut().load_named(&subset("target1"))?;
        self.targets[1].params_mut().load_named(&subset("target2"))?;
        self.log_alpha.load_named(&subset("temperature"))?;
        let sizes: [Vec<usize>; 4] = [
            numels(self.actor.params()),
            numels(self.critics[0].params()),
            numels(self.critics[1].params()),
            numels(&self.log_alpha),
        ];
        let names = self.optimizers().map(|(n, _)| n);
        let mut states = Vec::with_capacity(4);
        for (name, sizes) in names.iter().zip(&sizes) {
            states.push(adam_from_tensors(name, sizes, entries)?);
        }
        let mut states = states.into_iter();
        self.opt_actor.set_state(states.next().expect("four states"));
        self.opt_critics[0].set_state(states.next().expect("four states"));
        self.opt_critics[1].set_state(states.next().expect("four states"));
        self.opt_alpha.set_state(states.next().expect("four states"));
        Ok(())
    }
}

fn numels(p: &ParamSet) -> Vec<usize> {
    p.tensors().iter().map(Tensor::numel).collect()
}

fn adam_tensors(name: &str, state: &AdamState) -> Vec<(String, Tensor)> {
    let mut out = vec![(format!("{name}.step"), Tensor::scalar(state.step as f64))];
    for (i, (m, v)) in state.m.iter().zip(&state.v).enumerate() {
        out.push((
            format!("{name}.m.{i}"),
            Tensor::new(&[m.len()], m.clone()).expect("moment shape"),
        ));
        out.push((
            format!("{name}.v.{i}"),
            Tensor::new(&[v.len()], v.clone()).expect("moment shape"),
        ));
    }
    out
}

fn adam_from_tensors(name: &str, sizes: &[usize], entries: &[(String, Tensor)]) -> Result<AdamState> {
    let find = |key: String| {
        entries
            .iter()
            .find(|(n, _)| *n == key)
            .map(|(_, t)| t.data().to_vec())
            .ok_or_else(|| CoreError::Checkpoint(format!("snapshot is missing {key}")))
    };
    let step = find(format!("{name}.step"))?[0] as u64;
    if step == 0 {
        return Ok(AdamState {
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        });
    }
    let mut m = Vec::with_capacity(sizes.len());
    let mut v = Vec::with_capacity(sizes.len());
    for (i, &n) in sizes.iter().enumerate() {
        let mi = find(format!("{name}.m.{i}"))?;
        let vi = find(format!("{name}.v.{i}"))?;
        if mi.len() != n || vi.len() != n {
            return Err(CoreError::Checkpoint(format!("{name} moment {i} has the wrong size")));
        }
        m.push(mi);
        v.push(vi);
    }
    Ok(AdamState { step, m, v })
}

fn check_batch(batch: &Batch) -> Result<()> {
    if batch.len == 0 {
        return Err(CoreError::Contract("empty batch".into()));
    }
    Ok(())
}

fn noise<R: Rng + ?Sized>(tape: &mut Tape, n: usize, rng: &mut R) -> Result<tempfuser_nd::Var> {
    let xi: Vec<f64> = (0..n).flat_map(|_| standard_normal(rng)).collect();
    Ok(tape.constant(&[n, ACTION_DIM], xi)?)
}

/// `y = r + γ (1 − done) (min(q1, q2) − α log π)`, elementwise.
pub fn td_targets(
    rewards: &[f64],
    done: &[f64],
    gamma: f64,
    q1: &[f64],
    q2: &[f64],
    alpha: f64,
    log_prob: &[f64],
) -> Vec<f64> {
    (0..rewards.len())
        .map(|i| {
            let soft = q1[i].min(q2[i]) - alpha * log_prob[i];
            rewards[i] + gamma * (1.0 - done[i]) * soft
        })
        .collect()
}

/// Target averaging for matching critic pairs.
pub fn polyak(targets: &mut [Critic; 2], critics: &[Critic; 2], tau: f64) -> Result<()> {
    for (t, c) in targets.iter_mut().zip(critics) {
        t.params_mut()
            .polyak_from(c.params(), tau)
            .map_err(|e| CoreError::Contract(e.to_string()))?;
    }
    Ok(())
}

/// Summary of one collected episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeStats {
    /// Environment steps, warm-up included.
    pub env_steps: usize,
    /// Transitions added to replay.
    pub records: usize,
    /// Reward summed over the policy-controlled steps.
    pub total_reward: f64,
    /// Set when the simulator faulted and the episode was discarded.
    pub fault: Option<String>,
}

/// Plays one episode: warm-up with the initial action, then `policy` on the
/// trajectory views. `on_step` sees every step with a flag marking warm-up.
/// Both callbacks get the environment as it stands after the latest step.
/// Returns the number of steps flown.
pub fn play<E, P, S>(env: &mut E, net: &NetworkConfig, seed: u64, mut policy: P, mut on_step: S) -> Result<usize>
where
    E: Environment + ?Sized,
    P: FnMut(&E, &HistoryBuffer) -> Result<[f64; ACTION_DIM]>,
    S: FnMut(&E, &EnvStep, bool, &[f64; ACTION_DIM]),
{
    let mut history = HistoryBuffer::new(net.n_s, net.n_l, net.stride)?;
    env.reset(seed)?;
    let a_init = initial_action().to_array();
    let mut steps = 0;
    for _ in 0..net.warm_up() {
        let out = env.step(&initial_action())?;
        steps += 1;
        history.push(out.state);
        on_step(env, &out, true, &a_init);
        if out.finished {
            return Ok(steps);
        }
    }
    loop {
        let a = policy(env, &history)?;
        let out = env.step(&ControlCommand::from_array(a))?;
        steps += 1;
        history.push(out.state);
        on_step(env, &out, false, &a);
        if out.finished {
            return Ok(steps);
        }
    }
}

/// Collects one exploration episode into `replay`. A simulator fault
/// discards the episode and is reported in the stats instead of failing.
pub fn rollout_episode<E, R>(
    env: &mut E,
    actor: &Actor,
    seed: u64,
    replay: &mut Replay,
    rng: &mut R,
) -> Result<EpisodeStats>
where
    E: Environment + ?Sized,
    R: Rng + ?Sized,
{
    let mut frames: Vec<StateVector> = Vec::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut total_reward = 0.0;
    let result = play(
        env,
        actor.config(),
        seed,
        |_, h| {
            let (s_l, s_s) = views(h)?;
            Ok(actor.infer(&s_l, &s_s)?[0].sample(rng).0)
        },
        |_, out, warm, a| {
            frames.push(out.state);
            if !warm {
                total_reward += out.reward;
                steps.push(StepRecord {
                    action: *a,
                    reward: out.reward,
                    done: out.done,
                });
            }
        },
    );
    match result {
        Ok(env_steps) => {
            replay.commit_episode(&frames, &steps)?;
            Ok(EpisodeStats {
                env_steps,
                records: steps.len(),
                total_reward,
                fault: None,
            })
        }
        Err(CoreError::Sim(e)) => Ok(EpisodeStats {
            env_steps: frames.len(),
            records: 0,
            total_reward: 0.0,
            fault: Some(e.to_string()),
        }),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn targets_reduce_to_rewards_without_bootstrap() {
        let r = [1.0, -2.0, 0.5];
        let q = [10.0, 20.0, 30.0];
        let lp = [-1.0, 2.0, 0.3];
        assert_eq!(td_targets(&r, &[0.0; 3], 0.0, &q, &q, 0.0, &lp), r.to_vec());
        assert_eq!(td_targets(&r, &[1.0; 3], 0.99, &q, &q, 0.7, &lp), r.to_vec());
    }

    #[test]
    fn targets_use_the_smaller_critic_symmetrically() {
        let r = [0.0, 0.0];
        let (q1, q2) = ([1.0, 5.0], [3.0, 2.0]);
        let y = td_targets(&r, &[0.0; 2], 0.5, &q1, &q2, 0.0, &[0.0; 2]);
        assert_eq!(y, vec![0.5, 1.0]);
        assert_eq!(y, td_targets(&r, &[0.0; 2], 0.5, &q2, &q1, 0.0, &[0.0; 2]));
    }
}
