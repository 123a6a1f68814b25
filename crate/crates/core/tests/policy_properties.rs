//! Structural properties of the actor and the squashed Gaussian head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfuser_core::policy::{squash, squashed_log_prob, standard_normal, ActionDistribution, PipelineKind};
use tempfuser_core::{Actor, ActorArch, NetworkConfig, ACTION_DIM};
use tempfuser_nd::Tape;
use tempfuser_sim::STATE_DIM;

fn net(arch: ActorArch, layers: usize) -> NetworkConfig {
    NetworkConfig {
        arch,
        d: 16,
        layers,
        heads: 4,
        mlp_ratio: 2,
        n_s: 8,
        n_l: 8,
        stride: 8,
    }
}

fn random_traj(rows: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..rows * STATE_DIM).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn mean_action(actor: &Actor, s_l: &[f64], s_s: &[f64]) -> [f64; ACTION_DIM] {
    actor.infer(s_l, s_s).unwrap()[0].mu
}

#[test]
fn embeddings_are_causal_in_time() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let actor = Actor::new(&net(ActorArch::TempFuser, 1), &mut rng).unwrap();
    let traj = random_traj(8, &mut rng);
    let embed = |data: &[f64]| {
        let mut tape = Tape::new();
        let vars = actor.params().bind(&mut tape, false);
        let x = tape.constant(&[1, 8, STATE_DIM], data.to_vec()).unwrap();
        let h = actor.embed(&mut tape, &vars, x, PipelineKind::Short).unwrap();
        assert_eq!(tape.shape(h), [1, 8, 16]);
        tape.value(h).to_vec()
    };
    let base = embed(&traj);
    for j in [0, 3, 7] {
        let mut changed = traj.clone();
        changed[j * STATE_DIM + 5] += 0.5;
        let out = embed(&changed);
        for row in 0..8 {
            let same = base[row * 16..(row + 1) * 16] == out[row * 16..(row + 1) * 16];
            assert_eq!(same, row < j, "row {row} after perturbing row {j}");
        }
    }
}

#[test]
fn assembled_sequence_has_one_token_per_row_plus_class() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let actor = Actor::new(&net(ActorArch::TempFuser, 2), &mut rng).unwrap();
    let mut tape = Tape::new();
    let vars = actor.params().bind(&mut tape, false);
    let l = tape.constant(&[3, 8, STATE_DIM], random_traj(24, &mut rng)).unwrap();
    let s = tape.constant(&[3, 8, STATE_DIM], random_traj(24, &mut rng)).unwrap();
    let h_l = actor.embed(&mut tape, &vars, l, PipelineKind::Long).unwrap();
    let h_s = actor.embed(&mut tape, &vars, s, PipelineKind::Short).unwrap();
    let z = actor.assemble(&mut tape, &vars, h_l, h_s).unwrap();
    assert_eq!(tape.shape(z), [3, 17, 16]);
    let y = actor.encode(&mut tape, &vars, z).unwrap();
    assert_eq!(tape.shape(y), [3, 16]);
}

#[test]
fn without_encoder_layers_the_class_token_ignores_the_trajectories() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let actor = Actor::new(&net(ActorArch::TempFuser, 0), &mut rng).unwrap();
    let a = mean_action(&actor, &random_traj(8, &mut rng), &random_traj(8, &mut rng));
    let b = mean_action(&actor, &random_traj(8, &mut rng), &random_traj(8, &mut rng));
    assert_eq!(a, b);
    let deep = Actor::new(&net(ActorArch::TempFuser, 1), &mut rng).unwrap();
    let (l, s) = (random_traj(8, &mut rng), random_traj(8, &mut rng));
    assert_ne!(
        mean_action(&deep, &l, &s),
        mean_action(&deep, &random_traj(8, &mut rng), &s)
    );
}

#[test]
fn self_attention_is_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let actor = Actor::new(&net(ActorArch::TempFuser, 1), &mut rng).unwrap();
    let t = 6;
    let x: Vec<f64> = (0..t * 16).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let perm = [4, 0, 5, 2, 1, 3];
    let permuted: Vec<f64> = perm.iter().flat_map(|&p| x[p * 16..(p + 1) * 16].to_vec()).collect();
    let run = |data: Vec<f64>| {
        let mut tape = Tape::new();
        let vars = actor.params().bind(&mut tape, false);
        let v = tape.constant(&[1, t, 16], data).unwrap();
        let y = actor.msa(&mut tape, &vars, 0, v).unwrap();
        tape.value(y).to_vec()
    };
    let (y, yp) = (run(x), run(permuted));
    for (i, &p) in perm.iter().enumerate() {
        for c in 0..16 {
            assert!((yp[i * 16 + c] - y[p * 16 + c]).abs() < 1e-12);
        }
    }
}

#[test]
fn positional_embedding_matters() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut actor = Actor::new(&net(ActorArch::TempFuser, 1), &mut rng).unwrap();
    let (l, s) = (random_traj(8, &mut rng), random_traj(8, &mut rng));
    let before = mean_action(&actor, &l, &s);
    let idx = actor
        .params()
        .names()
        .iter()
        .position(|n| n == "pos_embedding")
        .unwrap();
    actor.params_mut().tensors_mut()[idx]
        .data_mut()
        .iter_mut()
        .for_each(|v| *v *= 2.0);
    assert_ne!(before, mean_action(&actor, &l, &s));
}

#[test]
fn time_order_of_each_trajectory_matters() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for arch in [ActorArch::TempFuser, ActorArch::LsLstm, ActorArch::Lstm] {
        let actor = Actor::new(&net(arch, 1), &mut rng).unwrap();
        let (l, s) = (random_traj(8, &mut rng), random_traj(8, &mut rng));
        let reversed: Vec<f64> = s.chunks(STATE_DIM).rev().flatten().copied().collect();
        assert_ne!(
            mean_action(&actor, &l, &s),
            mean_action(&actor, &l, &reversed),
            "{arch:?}"
        );
    }
}

#[test]
fn zero_noise_sample_is_the_deterministic_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let actor = Actor::new(&net(ActorArch::TempFuser, 1), &mut rng).unwrap();
    let dist = actor
        .infer(&random_traj(8, &mut rng), &random_traj(8, &mut rng))
        .unwrap()[0];
    assert_eq!(dist.sample_with_noise(&[0.0; ACTION_DIM]).0, dist.mode());
    for i in 0..ACTION_DIM {
        assert_eq!(dist.mode()[i], dist.mu[i].tanh());
    }
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// E[tanh(μ + σξ)] and E[tanh²(μ + σξ)] by trapezoidal quadrature over ξ.
fn squashed_moments(mu: f64, sigma: f64) -> (f64, f64) {
    let (lo, hi, n) = (-12.0, 12.0, 24_000);
    let h = (hi - lo) / n as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..=n {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == n { 0.5 } else { 1.0 } * h * normal_pdf(x);
        let a = (mu + sigma * x).tanh();
        m1 += w * a;
        m2 += w * a * a;
    }
    (m1, m2)
}

#[test]
fn monte_carlo_mean_matches_quadrature() {
    let dist = ActionDistribution {
        mu: [0.3, -1.2, 2.0, 0.0],
        sigma: [0.5, 1.0, 0.3, 2.0],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 40_000;
    let mut sum = [0.0; ACTION_DIM];
    for _ in 0..n {
        let (a, _) = dist.sample(&mut rng);
        for i in 0..ACTION_DIM {
            sum[i] += a[i];
        }
    }
    for i in 0..ACTION_DIM {
        let (m1, m2) = squashed_moments(dist.mu[i], dist.sigma[i]);
        let se = ((m2 - m1 * m1) / n as f64).sqrt();
        let mc = sum[i] / n as f64;
        assert!((mc - m1).abs() < 3.0 * se, "dim {i}: mc {mc} quadrature {m1} se {se}");
    }
}

#[test]
fn pre_squash_mean_matches_mu() {
    let dist = ActionDistribution {
        mu: [0.4, -0.9, 1.3, 0.0],
        sigma: [0.3, 0.6, 0.2, 0.8],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 100_000;
    let mut sum = [0.0; ACTION_DIM];
    for _ in 0..n {
        let (a, _) = dist.sample(&mut rng);
        for i in 0..ACTION_DIM {
            sum[i] += a[i].atanh();
        }
    }
    for i in 0..ACTION_DIM {
        let se = dist.sigma[i] / (n as f64).sqrt();
        let mean = sum[i] / n as f64;
        assert!(
            (mean - dist.mu[i]).abs() < 3.0 * se,
            "dim {i}: {mean} vs {}",
            dist.mu[i]
        );
    }
}

#[test]
fn squashed_density_integrates_to_one() {
    for &(mu, sigma) in &[(0.0, 1.0), (0.8, 0.4), (-1.5, 1.5), (2.5, 0.2), (0.0, 3.0)] {
        // midpoint rule in action space on nodes a_i = tanh(u_i)
        let (lo, hi, n) = (mu - 12.0 * sigma, mu + 12.0 * sigma, 200_000);
        let du = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            let (u0, u1) = (lo + i as f64 * du, lo + (i + 1) as f64 * du);
            let da = u1.tanh() - u0.tanh();
            total += squashed_log_prob(mu, sigma, 0.5 * (u0 + u1)).exp() * da;
        }
        assert!((total - 1.0).abs() < 1e-3, "mu {mu} sigma {sigma}: {total}");
    }
}

#[test]
fn a_million_samples_stay_strictly_inside_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let actor = Actor::new(&net(ActorArch::TempFuser, 1), &mut rng).unwrap();
    let mut dists = actor
        .infer(&random_traj(8, &mut rng), &random_traj(8, &mut rng))
        .unwrap();
    // saturating means and the widest allowed spread
    dists.push(ActionDistribution::from_log_std(
        [30.0, -30.0, 19.5, -400.0],
        [2.0; ACTION_DIM],
    ));
    dists.push(ActionDistribution::from_log_std([0.0; ACTION_DIM], [2.0; ACTION_DIM]));
    for k in 0..1_000_000 {
        let (a, lp) = dists[k % dists.len()].sample(&mut rng);
        assert!(a.iter().all(|v| v.abs() < 1.0), "{a:?}");
        assert!(!lp.is_nan());
    }
}

#[test]
fn vanishing_spread_recovers_the_mean_action() {
    let mu = [0.7, -2.0, 0.05, 3.0];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for sigma in [1e-6, 1e-9, 1e-14] {
        let dist = ActionDistribution {
            mu,
            sigma: [sigma; ACTION_DIM],
        };
        let xi = standard_normal(&mut rng);
        let (a, _) = dist.sample_with_noise(&xi);
        let worst = (0..ACTION_DIM).map(|i| (a[i] - mu[i].tanh()).abs()).fold(0.0, f64::max);
        assert!(worst <= 10.0 * sigma.max(1e-13), "sigma {sigma}: {worst}");
        if sigma <= 1e-14 {
            assert!(worst < 1e-12);
        }
    }
    assert_eq!(squash(40.0), 1.0 - f64::EPSILON);
}
