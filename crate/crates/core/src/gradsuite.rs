//! Named finite-difference gradient checks over every tape operation, the
//! LSTM cell and the full actor and critic graphs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use tempfuser_nd::gradcheck::{self, GradReport, REL_TOL, STEP};
use tempfuser_nd::{lstm_step, LstmVars, NdError, Tape, Tensor, Var};
use tempfuser_sim::STATE_DIM;

use crate::config::{ActorArch, NetworkConfig};
use crate::critic::Critic;
use crate::error::{CoreError, Result};
use crate::policy::{squash_sample, Actor, ACTION_DIM};

/// Coordinates probed per input tensor.
const PROBES: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCase {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub passed: bool,
}

fn summarize(name: &str, reports: &[GradReport]) -> GradCase {
    let max_rel_err = reports.iter().map(|r| r.max_rel_err).fold(0.0, f64::max);
    GradCase {
        name: name.to_string(),
        checked: reports.iter().map(|r| r.checked).sum(),
        max_rel_err,
        passed: max_rel_err <= REL_TOL,
    }
}

fn rand_t(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

/// Values bounded away from zero, for ops with a kink or pole there.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape, data).expect("shape matches data")
}

/// Weighted sum with fixed pseudo-random weights, so every output element
/// contributes a distinct cotangent.
fn project(t: &mut Tape, v: Var) -> Result<Var> {
    let shape = t.shape(v).to_vec();
    let n: usize = shape.iter().product();
    let w: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
    let w = t.constant(&shape, w)?;
    let p = t.mul(v, w)?;
    Ok(t.sum(p))
}

type Build = Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>;

/// [`gradcheck::check`] for graphs built from this crate's layers.
fn check<F>(inputs: &[Tensor], build: F) -> Result<Vec<GradReport>>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let lowered = |t: &mut Tape, v: &[Var]| {
        build(t, v).map_err(|e| match e {
            CoreError::Nd(e) => e,
            other => NdError::Contract(other.to_string()),
        })
    };
    Ok(gradcheck::check(inputs, lowered, STEP, PROBES)?)
}

fn op_cases(rng: &mut ChaCha8Rng) -> Vec<(&'static str, Vec<Tensor>, Build)> {
    let unary = |f: fn(&mut Tape, Var) -> Var| -> Build {
        Box::new(move |t: &mut Tape, v: &[Var]| {
            let y = f(t, v[0]);
            project(t, y)
        })
    };
    vec![
        (
            "matmul",
            vec![rand_t(&[3, 4], rng), rand_t(&[4, 2], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.matmul(v[0], v[1])?;
                project(t, y)
            }) as Build,
        ),
        (
            "matmul_batched",
            vec![rand_t(&[2, 3, 4], rng), rand_t(&[2, 4, 3], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.matmul(v[0], v[1])?;
                project(t, y)
            }),
        ),
        (
            "matmul_broadcast",
            vec![rand_t(&[2, 3, 4], rng), rand_t(&[4, 2], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.matmul(v[0], v[1])?;
                project(t, y)
            }),
        ),
        (
            "transpose",
            vec![rand_t(&[2, 3, 4], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.transpose(v[0])?;
                project(t, y)
            }),
        ),
        (
            "add_sub_mul",
            vec![rand_t(&[3, 2], rng), rand_t(&[3, 2], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let a = t.add(v[0], v[1])?;
                let b = t.sub(v[0], v[1])?;
                let y = t.mul(a, b)?;
                project(t, y)
            }),
        ),
        (
            "add_broadcast",
            vec![rand_t(&[2, 3, 4], rng), rand_t(&[4], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.add_broadcast(v[0], v[1])?;
                project(t, y)
            }),
        ),
        (
            "scale_shift_neg",
            vec![rand_t(&[5], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let a = t.scale(v[0], -1.7);
                let b = t.add_scalar(a, 0.3);
                let y = t.neg(b);
                project(t, y)
            }),
        ),
        ("relu", vec![away_from_zero(&[8], rng)], unary(Tape::relu)),
        ("gelu", vec![rand_t(&[8], rng)], unary(Tape::gelu)),
        ("tanh", vec![rand_t(&[8], rng)], unary(Tape::tanh)),
        ("sigmoid", vec![rand_t(&[8], rng)], unary(Tape::sigmoid)),
        ("exp", vec![rand_t(&[8], rng)], unary(Tape::exp)),
        (
            "ln",
            vec![Tensor::new(&[4], vec![0.3, 1.0, 2.5, 7.0]).expect("4 values")],
            unary(Tape::ln),
        ),
        ("softplus", vec![rand_t(&[8], rng)], unary(Tape::softplus)),
        ("square", vec![rand_t(&[8], rng)], unary(Tape::square)),
        (
            "clamp",
            vec![Tensor::new(&[4], vec![-3.0, -0.5, 0.4, 2.5]).expect("4 values")],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.clamp(v[0], -1.0, 1.0);
                project(t, y)
            }),
        ),
        (
            "minimum",
            vec![away_from_zero(&[6], rng), rand_t(&[6], rng).with_requires_grad(false)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.minimum(v[0], v[1])?;
                project(t, y)
            }),
        ),
        (
            "sum_mean",
            vec![rand_t(&[3, 4], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let s = t.sum_last(v[0]);
                let sq = t.square(s);
                let m = t.mean(v[0]);
                let a = t.sum(sq);
                let m2 = t.scale(m, 3.0);
                Ok(t.add(a, m2)?)
            }),
        ),
        ("softmax", vec![rand_t(&[2, 5], rng)], unary(Tape::softmax)),
        (
            "layer_norm",
            vec![rand_t(&[3, 6], rng), rand_t(&[6], rng), rand_t(&[6], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let y = t.layer_norm(v[0], v[1], v[2], 1e-5)?;
                project(t, y)
            }),
        ),
        (
            "reshape_permute",
            vec![rand_t(&[2, 3, 4], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let a = t.permute(v[0], &[2, 0, 1])?;
                let y = t.reshape(a, &[4, 6])?;
                project(t, y)
            }),
        ),
        (
            "narrow_concat",
            vec![rand_t(&[3, 4], rng), rand_t(&[3, 2], rng)],
            Box::new(|t: &mut Tape, v: &[Var]| {
                let a = t.narrow(v[0], 1, 1, 2)?;
                let y = t.concat(&[a, v[1], a], 1)?;
                project(t, y)
            }),
        ),
    ]
}

fn small_net(arch: ActorArch) -> NetworkConfig {
    NetworkConfig {
        arch,
        d: 8,
        layers: 1,
        heads: 2,
        mlp_ratio: 2,
        n_s: 2,
        n_l: 2,
        stride: 2,
    }
}

/// Actor parameters followed by the long and short trajectories.
fn actor_inputs(actor: &Actor, batch: usize, rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let cfg = actor.config();
    let mut inputs: Vec<Tensor> = actor.params().tensors().to_vec();
    inputs.push(rand_t(&[batch, cfg.n_l, STATE_DIM], rng));
    inputs.push(rand_t(&[batch, cfg.n_s, STATE_DIM], rng));
    inputs
}

/// Runs every check. Returns one case per named graph.
pub fn run(seed: u64) -> Result<Vec<GradCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();
    for (name, inputs, build) in op_cases(&mut rng) {
        let reports = check(&inputs, build)?;
        cases.push(summarize(&format!("op.{name}"), &reports));
    }

    let (hidden, input, batch) = (5, 3, 2);
    let (w_ih, w_hh, bias) = tempfuser_nd::lstm::init_weights(input, hidden, &mut rng);
    let lstm_inputs = vec![
        w_ih,
        w_hh,
        bias,
        rand_t(&[batch, input], &mut rng),
        rand_t(&[batch, hidden], &mut rng),
        rand_t(&[batch, hidden], &mut rng),
    ];
    let reports = check(&lstm_inputs, |t, v| {
        let w = LstmVars {
            w_ih: v[0],
            w_hh: v[1],
            bias: v[2],
        };
        let (h, c) = lstm_step(t, v[3], v[4], v[5], &w)?;
        let (ph, pc) = (project(t, h)?, project(t, c)?);
        Ok(t.add(ph, pc)?)
    })?;
    cases.push(summarize("lstm_step", &reports));

    for arch in [ActorArch::TempFuser, ActorArch::LsLstm, ActorArch::Lstm] {
        let net = small_net(arch);
        let actor = Actor::new(&net, &mut rng)?;
        let inputs = actor_inputs(&actor, 2, &mut rng);
        let np = actor.params().len();
        let reports = check(&inputs, |t, v| {
            let (mu, log_std) = actor.forward(t, &v[..np], v[np], v[np + 1])?;
            let (pm, ps) = (project(t, mu)?, project(t, log_std)?);
            Ok(t.add(pm, ps)?)
        })?;
        cases.push(summarize(&format!("actor.{}.distribution", arch.name()), &reports));

        let xi: Vec<f64> = (0..2 * ACTION_DIM).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let reports = check(&inputs, |t, v| {
            let (mu, log_std) = actor.forward(t, &v[..np], v[np], v[np + 1])?;
            let xi = t.constant(&[2, ACTION_DIM], xi.clone())?;
            let (a, log_prob) = squash_sample(t, mu, log_std, xi)?;
            let (pa, pl) = (project(t, a)?, project(t, log_prob)?);
            Ok(t.add(pa, pl)?)
        })?;
        cases.push(summarize(&format!("actor.{}.squashed_sample", arch.name()), &reports));
    }

    let net = small_net(ActorArch::TempFuser);
    let critic = Critic::new(&net, &mut rng)?;
    let mut inputs: Vec<Tensor> = critic.params().tensors().to_vec();
    inputs.push(rand_t(&[2, net.n_l, STATE_DIM], &mut rng));
    inputs.push(rand_t(&[2, net.n_s, STATE_DIM], &mut rng));
    inputs.push(rand_t(&[2, ACTION_DIM], &mut rng));
    let np = critic.params().len();
    let reports = check(&inputs, |t, v| {
        let q = critic.q_value(t, &v[..np], v[np], v[np + 1], v[np + 2])?;
        project(t, q)
    })?;
    cases.push(summarize("critic.params", &reports[..np]));
    cases.push(summarize("critic.trajectories", &reports[np..np + 2]));
    cases.push(summarize("critic.action", &reports[np + 2..]));
    Ok(cases)
}
