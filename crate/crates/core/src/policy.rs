//! The actor: trajectory embeddings, temporal fusion, squashed Gaussian head.
//!
//! Parameter names, in registration order:
//!
//! ```text
//! long.proj.{weight,bias}   long.lstm.{w_ih,w_hh,bias}     (absent for `lstm`)
//! short.proj.{weight,bias}  short.lstm.{w_ih,w_hh,bias}
//! class_token [1, d]        pos_embedding [n_l + n_s + 1, d]          (temp_fuser)
//! encoder.{k}.ln1.{gain,bias}  encoder.{k}.attn.{q,k,v,o}.{weight,bias}
//! encoder.{k}.ln2.{gain,bias}  encoder.{k}.mlp.{fc1,fc2}.{weight,bias}
//! final_norm.{gain,bias}                                              (temp_fuser)
//! head.{weight,bias}  head_norm.{gain,bias}
//! dist_norm.{gain,bias}  mean.{weight,bias}  log_std.{weight,bias}
//! ```

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use tempfuser_nd::{ParamSet, Tape, Tensor, Var};
use tempfuser_sim::HistoryBuffer;

use crate::config::{ActorArch, NetworkConfig};
use crate::error::{CoreError, Result};
use crate::layers::{stack_constant, Linear, Norm, Pipeline};

pub const ACTION_DIM: usize = 4;
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Largest action magnitude handed out; `tanh` alone rounds to ±1 past |u| ≈ 19.
pub const ACTION_BOUND: f64 = 1.0 - f64::EPSILON;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const EMBED_INIT: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineKind {
    Long,
    Short,
}

#[derive(Debug, Clone)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone)]
struct Block {
    ln1: Norm,
    attn: Attention,
    ln2: Norm,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone)]
enum Body {
    Fuser {
        class_token: usize,
        pos_embedding: usize,
        blocks: Vec<Block>,
        final_norm: Norm,
    },
    Concat,
}

#[derive(Debug, Clone)]
pub struct Actor {
    cfg: NetworkConfig,
    params: ParamSet,
    long: Option<Pipeline>,
    short: Pipeline,
    body: Body,
    head: Linear,
    head_norm: Norm,
    dist_norm: Norm,
    mean: Linear,
    log_std: Linear,
}

impl Actor {
    pub fn new<R: Rng + ?Sized>(cfg: &NetworkConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d;
        let input = NetworkConfig::INPUT_DIM;
        let mut params = ParamSet::new();
        let long = match cfg.arch {
            ActorArch::Lstm => None,
            _ => Some(Pipeline::new(&mut params, "long", input, d, rng)),
        };
        let short = Pipeline::new(&mut params, "short", input, d, rng);
        let (body, head_in) = match cfg.arch {
            ActorArch::TempFuser => {
                let class_token = params.add("class_token", Tensor::uniform(&[1, d], EMBED_INIT, rng));
                let pos_embedding = params.add("pos_embedding", Tensor::uniform(&[cfg.tokens(), d], EMBED_INIT, rng));
                let hidden = cfg.mlp_ratio * d;
                let blocks = (0..cfg.layers)
                    .map(|k| {
                        let p = format!("encoder.{k}");
                        let ln1 = Norm::new(&mut params, &format!("{p}.ln1"), d);
                        let attn = Attention {
                            q: Linear::new(&mut params, &format!("{p}.attn.q"), d, d, rng),
                            k: Linear::new(&mut params, &format!("{p}.attn.k"), d, d, rng),
                            v: Linear::new(&mut params, &format!("{p}.attn.v"), d, d, rng),
                            o: Linear::new(&mut params, &format!("{p}.attn.o"), d, d, rng),
                        };
                        let ln2 = Norm::new(&mut params, &format!("{p}.ln2"), d);
                        let fc1 = Linear::new(&mut params, &format!("{p}.mlp.fc1"), d, hidden, rng);
                        let fc2 = Linear::new(&mut params, &format!("{p}.mlp.fc2"), hidden, d, rng);
                        Block {
                            ln1,
                            attn,
                            ln2,
                            fc1,
                            fc2,
                        }
                    })
                    .collect();
                let final_norm = Norm::new(&mut params, "final_norm", d);
                let body = Body::Fuser {
                    class_token,
                    pos_embedding,
                    blocks,
                    final_norm,
                };
                (body, d)
            }
            ActorArch::LsLstm => (Body::Concat, 2 * d),
            ActorArch::Lstm => (Body::Concat, d),
        };
        let head = Linear::new(&mut params, "head", head_in, d, rng);
        let head_norm = Norm::new(&mut params, "head_norm", d);
        let dist_norm = Norm::new(&mut params, "dist_norm", d);
        let mean = Linear::new(&mut params, "mean", d, ACTION_DIM, rng);
        let log_std = Linear::new(&mut params, "log_std", d, ACTION_DIM, rng);
        Ok(Self {
            cfg: cfg.clone(),
            params,
            long,
            short,
            body,
            head,
            head_norm,
            dist_norm,
            mean,
            log_std,
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

    /// Per-row linear + ReLU and an LSTM scan; `traj: [B, n, 33]` gives
    /// every hidden output, `[B, n, d]`.
    pub fn embed(&self, tape: &mut Tape, vars: &[Var], traj: Var, kind: PipelineKind) -> Result<Var> {
        let (pipe, rows) = self.pipeline(kind)?;
        check_rows(tape, traj, rows, kind)?;
        pipe.scan(tape, vars, traj, true)
    }

    fn pipeline(&self, kind: PipelineKind) -> Result<(&Pipeline, usize)> {
        match kind {
            PipelineKind::Short => Ok((&self.short, self.cfg.n_s)),
            PipelineKind::Long => self
                .long
                .as_ref()
                .map(|p| (p, self.cfg.n_l))
                .ok_or_else(|| CoreError::Contract("the lstm actor has no long pipeline".into())),
        }
    }

    /// `[class; h_l; h_s] + pos`, as `[B, n_l + n_s + 1, d]`.
    pub fn assemble(&self, tape: &mut Tape, vars: &[Var], h_l: Var, h_s: Var) -> Result<Var> {
        let Body::Fuser {
            class_token,
            pos_embedding,
            ..
        } = &self.body
        else {
            return Err(CoreError::Contract(format!(
                "{} actor has no token sequence",
                self.cfg.arch.name()
            )));
        };
        let batch = tape.shape(h_l)[0];
        let d = self.cfg.d;
        let zeros = tape.constant(&[batch, 1, d], vec![0.0; batch * d])?;
        let class = tape.add_broadcast(zeros, vars[*class_token])?;
        let z = tape.concat(&[class, h_l, h_s], 1)?;
        Ok(tape.add_broadcast(z, vars[*pos_embedding])?)
    }

    /// Pre-norm encoder stack, class-token readout and output head: `[B, d]`.
    pub fn encode(&self, tape: &mut Tape, vars: &[Var], z0: Var) -> Result<Var> {
        let Body::Fuser { blocks, final_norm, .. } = &self.body else {
            return Err(CoreError::Contract(format!(
                "{} actor has no encoder",
                self.cfg.arch.name()
            )));
        };
        let mut z = z0;
        for block in blocks {
            let a = block.ln1.apply(tape, vars, z)?;
            let a = self.attention(tape, vars, &block.attn, a)?;
            z = tape.add(z, a)?;
            let m = block.ln2.apply(tape, vars, z)?;
            let m = block.fc1.apply(tape, vars, m)?;
            let m = tape.gelu(m);
            let m = block.fc2.apply(tape, vars, m)?;
            z = tape.add(z, m)?;
        }
        let batch = tape.shape(z)[0];
        let first = tape.narrow(z, 1, 0, 1)?;
        let first = tape.reshape(first, &[batch, self.cfg.d])?;
        let first = final_norm.apply(tape, vars, first)?;
        self.apply_head(tape, vars, first)
    }

    fn apply_head(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let y = self.head.apply(tape, vars, x)?;
        self.head_norm.apply(tape, vars, y)
    }

    /// Multi-head self-attention of encoder block `block` alone, without its
    /// norm or residual. `x: [B, T, d]`.
    pub fn msa(&self, tape: &mut Tape, vars: &[Var], block: usize, x: Var) -> Result<Var> {
        match &self.body {
            Body::Fuser { blocks, .. } if block < blocks.len() => self.attention(tape, vars, &blocks[block].attn, x),
            _ => Err(CoreError::Contract(format!("no encoder block {block}"))),
        }
    }

    fn attention(&self, tape: &mut Tape, vars: &[Var], attn: &Attention, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let (b, t, d) = (shape[0], shape[1], shape[2]);
        let h = self.cfg.heads;
        let dh = d / h;
        let split = |tape: &mut Tape, y: Var| -> Result<Var> {
            let y = tape.reshape(y, &[b, t, h, dh])?;
            let y = tape.permute(y, &[0, 2, 1, 3])?;
            Ok(tape.reshape(y, &[b * h, t, dh])?)
        };
        let q = attn.q.apply(tape, vars, x)?;
        let q = split(tape, q)?;
        let k = attn.k.apply(tape, vars, x)?;
        let k = split(tape, k)?;
        let v = attn.v.apply(tape, vars, x)?;
        let v = split(tape, v)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, 1.0 / (dh as f64).sqrt());
        let weights = tape.softmax(scores);
        let mixed = tape.matmul(weights, v)?;
        let mixed = tape.reshape(mixed, &[b, h, t, dh])?;
        let mixed = tape.permute(mixed, &[0, 2, 1, 3])?;
        let mixed = tape.reshape(mixed, &[b, t, d])?;
        attn.o.apply(tape, vars, mixed)
    }

    /// The fused feature `y: [B, d]` for a batch of trajectory pairs.
    pub fn features(&self, tape: &mut Tape, vars: &[Var], s_l: Var, s_s: Var) -> Result<Var> {
        match self.cfg.arch {
            ActorArch::TempFuser => {
                let h_l = self.embed(tape, vars, s_l, PipelineKind::Long)?;
                let h_s = self.embed(tape, vars, s_s, PipelineKind::Short)?;
                let z0 = self.assemble(tape, vars, h_l, h_s)?;
                self.encode(tape, vars, z0)
            }
            ActorArch::LsLstm => {
                check_rows(tape, s_l, self.cfg.n_l, PipelineKind::Long)?;
                check_rows(tape, s_s, self.cfg.n_s, PipelineKind::Short)?;
                let long = self.long.as_ref().expect("ls_lstm has a long pipeline");
                let h_l = long.scan(tape, vars, s_l, false)?;
                let h_s = self.short.scan(tape, vars, s_s, false)?;
                let both = tape.concat(&[h_l, h_s], 1)?;
                self.apply_head(tape, vars, both)
            }
            ActorArch::Lstm => {
                check_rows(tape, s_s, self.cfg.n_s, PipelineKind::Short)?;
                let h_s = self.short.scan(tape, vars, s_s, false)?;
                self.apply_head(tape, vars, h_s)
            }
        }
    }

    /// `(μ, log σ)`, each `[B, 4]`, with log σ clamped.
    pub fn distribution(&self, tape: &mut Tape, vars: &[Var], y: Var) -> Result<(Var, Var)> {
        let n = self.dist_norm.apply(tape, vars, y)?;
        let mu = self.mean.apply(tape, vars, n)?;
        let log_std = self.log_std.apply(tape, vars, n)?;
        Ok((mu, tape.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)))
    }

    pub fn forward(&self, tape: &mut Tape, vars: &[Var], s_l: Var, s_s: Var) -> Result<(Var, Var)> {
        let y = self.features(tape, vars, s_l, s_s)?;
        self.distribution(tape, vars, y)
    }

    /// Batched inference without gradients. `s_l` and `s_s` hold `B`
    /// row-major trajectories back to back.
    pub fn infer(&self, s_l: &[f64], s_s: &[f64]) -> Result<Vec<ActionDistribution>> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let (l, s) = self.trajectories(&mut tape, s_l, s_s)?;
        let (mu, log_std) = self.forward(&mut tape, &vars, l, s)?;
        Ok(tape
            .value(mu)
            .chunks(ACTION_DIM)
            .zip(tape.value(log_std).chunks(ACTION_DIM))
            .map(|(m, ls)| ActionDistribution::from_log_std(to4(m), to4(ls)))
            .collect())
    }

    /// Binds trajectory data as `[B, n_l, 33]` and `[B, n_s, 33]` constants.
    pub fn trajectories(&self, tape: &mut Tape, s_l: &[f64], s_s: &[f64]) -> Result<(Var, Var)> {
        let w = NetworkConfig::INPUT_DIM;
        let (ll, sl) = (self.cfg.n_l * w, self.cfg.n_s * w);
        if s_l.is_empty()
            || !s_l.len().is_multiple_of(ll)
            || !s_s.len().is_multiple_of(sl)
            || s_l.len() / ll != s_s.len() / sl
        {
            return Err(CoreError::Contract(format!(
                "trajectory buffers of {} and {} values do not form matching batches of {}x{w} and {}x{w}",
                s_l.len(),
                s_s.len(),
                self.cfg.n_l,
                self.cfg.n_s
            )));
        }
        let l = stack_constant(tape, self.cfg.n_l, w, s_l.to_vec())?;
        let s = stack_constant(tape, self.cfg.n_s, w, s_s.to_vec())?;
        Ok((l, s))
    }

    /// The evaluation action `tanh(μ)` for the current history.
    pub fn act_deterministic(&self, history: &HistoryBuffer) -> Result<[f64; ACTION_DIM]> {
        let (s_l, s_s) = views(history)?;
        Ok(self.infer(&s_l, &s_s)?[0].mode())
    }
}

/// Long and short views of a full history buffer.
pub fn views(history: &HistoryBuffer) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok((history.long_view()?, history.short_view()?))
}

fn check_rows(tape: &Tape, traj: Var, rows: usize, kind: PipelineKind) -> Result<()> {
    let shape = tape.shape(traj);
    if shape.len() != 3 || shape[1] != rows || shape[2] != NetworkConfig::INPUT_DIM {
        return Err(CoreError::Nd(tempfuser_nd::NdError::Dimension {
            op: "embed",
            detail: format!(
                "{kind:?} pipeline expects [B, {rows}, {}], got {shape:?}",
                NetworkConfig::INPUT_DIM
            ),
        }));
    }
    Ok(())
}

fn to4(v: &[f64]) -> [f64; ACTION_DIM] {
    [v[0], v[1], v[2], v[3]]
}

/// Reparameterized squashed sample on the tape.
///
/// `u = μ + σ ⊙ ξ`, `a = tanh(u)` and
/// `log π(a) = Σ [log N(u; μ, σ) − log(1 − tanh² u)]`, with the correction
/// written as `2 (ln 2 − u − softplus(−2u))` so it stays finite for large
/// `|u|`. `xi` is a constant `[B, 4]`. Returns `(a: [B, 4], log π: [B])`.
pub fn squash_sample(tape: &mut Tape, mu: Var, log_std: Var, xi: Var) -> Result<(Var, Var)> {
    let std = tape.exp(log_std);
    let noise = tape.mul(std, xi)?;
    let u = tape.add(mu, noise)?;
    let a = tape.tanh(u);
    // −½ξ² − ½ln 2π − 2 ln 2 does not depend on the parameters
    let offset: Vec<f64> = tape
        .value(xi)
        .iter()
        .map(|x| -0.5 * x * x - 0.5 * LN_2PI - 2.0 * std::f64::consts::LN_2)
        .collect();
    let shape = tape.shape(xi).to_vec();
    let offset = tape.constant(&shape, offset)?;
    let m2u = tape.scale(u, -2.0);
    let sp = tape.softplus(m2u);
    let t = tape.add(u, sp)?;
    let t = tape.scale(t, 2.0);
    let per_dim = tape.sub(offset, log_std)?;
    let per_dim = tape.add(per_dim, t)?;
    Ok((a, tape.sum_last(per_dim)))
}

/// `tanh(u)` kept strictly inside (−1, 1).
pub fn squash(u: f64) -> f64 {
    u.tanh().clamp(-ACTION_BOUND, ACTION_BOUND)
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Log-density of the squashed action `tanh(u)` for one action dimension.
pub fn squashed_log_prob(mu: f64, sigma: f64, u: f64) -> f64 {
    let z = (u - mu) / sigma;
    let gaussian = -0.5 * z * z - sigma.ln() - 0.5 * LN_2PI;
    gaussian - 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Diagonal Gaussian over the pre-squash action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionDistribution {
    pub mu: [f64; ACTION_DIM],
    /// Always positive.
    pub sigma: [f64; ACTION_DIM],
}

impl ActionDistribution {
    pub fn from_log_std(mu: [f64; ACTION_DIM], log_std: [f64; ACTION_DIM]) -> Self {
        Self {
            mu,
            sigma: log_std.map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX).exp()),
        }
    }

    /// `tanh(μ)`.
    pub fn mode(&self) -> [f64; ACTION_DIM] {
        self.mu.map(squash)
    }

    /// Squashed action and its log-probability for a given noise draw.
    pub fn sample_with_noise(&self, xi: &[f64; ACTION_DIM]) -> ([f64; ACTION_DIM], f64) {
        let mut a = [0.0; ACTION_DIM];
        let mut log_prob = 0.0;
        for i in 0..ACTION_DIM {
            let u = self.mu[i] + self.sigma[i] * xi[i];
            a[i] = squash(u);
            log_prob += squashed_log_prob(self.mu[i], self.sigma[i], u);
        }
        (a, log_prob)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ([f64; ACTION_DIM], f64) {
        self.sample_with_noise(&standard_normal(rng))
    }
}

pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> [f64; ACTION_DIM] {
    std::array::from_fn(|_| StandardNormal.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(arch: ActorArch) -> NetworkConfig {
        NetworkConfig {
            arch,
            d: 8,
            layers: 2,
            heads: 2,
            mlp_ratio: 2,
            n_s: 3,
            n_l: 4,
            stride: 2,
        }
    }

    fn random_batch(cfg: &NetworkConfig, batch: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = NetworkConfig::INPUT_DIM;
        let l = (0..batch * cfg.n_l * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let s = (0..batch * cfg.n_s * w).map(|_| rng.gen_range(-1.0..1.0)).collect();
        (l, s)
    }

    #[test]
    fn manifest_names_are_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let actor = Actor::new(&tiny(ActorArch::TempFuser), &mut rng).unwrap();
        let names = actor.params().names();
        assert_eq!(names[0], "long.proj.weight");
        assert!(names.contains(&"encoder.1.attn.q.weight".to_string()));
        assert_eq!(actor.params().get("pos_embedding").unwrap().shape(), &[8, 8]);
        assert_eq!(names.last().unwrap(), "log_std.bias");

        let lstm = Actor::new(&tiny(ActorArch::Lstm), &mut rng).unwrap();
        assert!(lstm
            .params()
            .names()
            .iter()
            .all(|n| !n.starts_with("long.") && !n.starts_with("encoder")));
        let ls = Actor::new(&tiny(ActorArch::LsLstm), &mut rng).unwrap();
        assert_eq!(ls.params().get("head.weight").unwrap().shape(), &[16, 8]);
    }

    #[test]
    fn batched_inference_matches_single_rows() {
        let cfg = tiny(ActorArch::TempFuser);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor = Actor::new(&cfg, &mut rng).unwrap();
        let (l, s) = random_batch(&cfg, 3, 9);
        let all = actor.infer(&l, &s).unwrap();
        let (lw, sw) = (cfg.n_l * 33, cfg.n_s * 33);
        for i in 0..3 {
            let one = actor.infer(&l[i * lw..(i + 1) * lw], &s[i * sw..(i + 1) * sw]).unwrap();
            for k in 0..ACTION_DIM {
                assert!((one[0].mu[k] - all[i].mu[k]).abs() < 1e-12);
                assert!((one[0].sigma[k] - all[i].sigma[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tape_sample_matches_scalar_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ls: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..1.0)).collect();
        let xi: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let mut tape = Tape::new();
        let m = tape.constant(&[2, 4], mu.clone()).unwrap();
        let l = tape.constant(&[2, 4], ls.clone()).unwrap();
        let x = tape.constant(&[2, 4], xi.clone()).unwrap();
        let (a, lp) = squash_sample(&mut tape, m, l, x).unwrap();
        for b in 0..2 {
            let dist = ActionDistribution::from_log_std(to4(&mu[b * 4..]), to4(&ls[b * 4..]));
            let (a_ref, lp_ref) = dist.sample_with_noise(&to4(&xi[b * 4..]));
            for k in 0..4 {
                assert!((tape.value(a)[b * 4 + k] - a_ref[k]).abs() < 1e-12);
            }
            assert!(
                (tape.value(lp)[b] - lp_ref).abs() < 1e-10,
                "{} vs {lp_ref}",
                tape.value(lp)[b]
            );
        }
    }

    #[test]
    fn squash_correction_is_finite_far_out() {
        for u in [-400.0, -40.0, 0.0, 40.0, 400.0] {
            assert!(squashed_log_prob(0.0, 1.0, u).is_finite(), "{u}");
        }
        // log(1 − tanh² u) at u = 0 is 0
        assert!((squashed_log_prob(0.0, 1.0, 0.0) + 0.5 * LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn zero_output_weights_give_unit_gaussian() {
        let cfg = tiny(ActorArch::TempFuser);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut actor = Actor::new(&cfg, &mut rng).unwrap();
        let names = actor.params().names().to_vec();
        for (n, t) in names.iter().zip(actor.params_mut().tensors_mut()) {
            if n.starts_with("mean.") || n.starts_with("log_std.") {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        let (l, s) = random_batch(&cfg, 2, 3);
        for dist in actor.infer(&l, &s).unwrap() {
            assert_eq!(dist.mu, [0.0; 4]);
            assert_eq!(dist.sigma, [1.0; 4]);
        }
    }

    #[test]
    fn wrong_row_count_is_a_dimension_error() {
        let cfg = tiny(ActorArch::TempFuser);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = Actor::new(&cfg, &mut rng).unwrap();
        let mut tape = Tape::new();
        let vars = actor.params().bind(&mut tape, false);
        let bad = tape.constant(&[1, 5, 33], vec![0.0; 165]).unwrap();
        let err = actor.embed(&mut tape, &vars, bad, PipelineKind::Short).unwrap_err();
        assert!(
            matches!(err, CoreError::Nd(tempfuser_nd::NdError::Dimension { .. })),
            "{err}"
        );
    }

    #[test]
    fn act_needs_a_full_history() {
        let cfg = tiny(ActorArch::Lstm);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = Actor::new(&cfg, &mut rng).unwrap();
        let mut h = HistoryBuffer::new(cfg.n_s, cfg.n_l, cfg.stride).unwrap();
        h.push(tempfuser_sim::StateVector::zeros());
        let err = actor.act_deterministic(&h).unwrap_err();
        assert!(
            matches!(err, CoreError::Sim(tempfuser_sim::SimError::WarmUp { .. })),
            "{err}"
        );
    }
}
