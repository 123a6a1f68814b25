//! Deterministic evaluation episodes, their aggregate metrics and trace export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tempfuser_sim::engagement::FULL_LIFE;
use tempfuser_sim::trace::TraceRecord;
use tempfuser_sim::{EpisodeConfig, Mode, OpponentController, OpponentPolicy, Termination};

use crate::config::NetworkConfig;
use crate::env::{DogfightEnv, Environment};
use crate::error::{io_err, CoreError, Result};
use crate::policy::{views, Actor, ACTION_DIM};
use crate::sac::play;

/// Who flies the ownship after warm-up.
#[derive(Debug, Clone, Copy)]
pub enum Pilot<'a> {
    /// Deterministic actions `tanh(μ)` of a trained or untrained actor.
    Policy(&'a Actor),
    /// A scripted baseline.
    Scripted(OpponentPolicy),
}

impl Pilot<'_> {
    pub fn name(&self) -> String {
        match self {
            Pilot::Policy(a) => a.config().arch.name().to_string(),
            Pilot::Scripted(p) => format!("script:{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub episode: usize,
    pub seed: u64,
    /// Environment steps, warm-up included.
    pub steps: usize,
    pub termination: Termination,
    pub own_life: u8,
    pub oppo_life: u8,
    pub total_reward: f64,
}

/// Aggregate outcome of an evaluation run. Percentages are per-episode means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub win_pct: f64,
    pub lose_pct: f64,
    pub draw_pct: f64,
    /// Mean fraction of opponent life removed.
    pub damage_pct: f64,
    /// Mean fraction of ownship life remaining.
    pub life_pct: f64,
    pub rows: Vec<EpisodeRow>,
}

/// Win, lose or draw from the ownship's point of view.
pub fn outcome(t: Termination) -> Result<Outcome> {
    match t {
        Termination::OwnWin | Termination::CrashOppo => Ok(Outcome::Win),
        Termination::OppoWin | Termination::CrashOwn => Ok(Outcome::Lose),
        Termination::Timeout | Termination::Draw => Ok(Outcome::Draw),
        Termination::None => Err(CoreError::Contract("episode has not finished".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Win,
    Lose,
    Draw,
}

impl EvalReport {
    pub fn from_rows(rows: Vec<EpisodeRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(CoreError::Contract("no evaluation episodes".into()));
        }
        let n = rows.len() as f64;
        let (mut win, mut lose, mut draw) = (0usize, 0usize, 0usize);
        let (mut damage, mut life) = (0.0, 0.0);
        let full = f64::from(FULL_LIFE);
        for r in &rows {
            match outcome(r.termination)? {
                Outcome::Win => win += 1,
                Outcome::Lose => lose += 1,
                Outcome::Draw => draw += 1,
            }
            damage += (full - f64::from(r.oppo_life)) / full * 100.0;
            life += f64::from(r.own_life) / full * 100.0;
        }
        Ok(Self {
            episodes: rows.len(),
            win_pct: win as f64 / n * 100.0,
            lose_pct: lose as f64 / n * 100.0,
            draw_pct: draw as f64 / n * 100.0,
            damage_pct: damage / n,
            life_pct: life / n,
            rows,
        })
    }

    /// Opponent life points removed, summed over episodes.
    pub fn damage_points(&self) -> u64 {
        self.rows.iter().map(|r| u64::from(FULL_LIFE - r.oppo_life)).sum()
    }
}

fn evaluation_config(base: &EpisodeConfig, opponent: OpponentPolicy, seed: u64) -> EpisodeConfig {
    EpisodeConfig {
        mode: Mode::Evaluation,
        opponent,
        seed,
        ..base.clone()
    }
}

fn pilot_action(
    pilot: &Pilot<'_>,
    script: &mut Option<OpponentController>,
    env: &DogfightEnv,
    h: &tempfuser_sim::HistoryBuffer,
) -> Result<[f64; ACTION_DIM]> {
    match pilot {
        Pilot::Policy(actor) => {
            let (s_l, s_s) = views(h)?;
            Ok(actor.infer(&s_l, &s_s)?[0].mode())
        }
        Pilot::Scripted(_) => {
            let eng = env.engagement().expect("reset before acting");
            let cfg = eng.config();
            let ctl = script.as_mut().expect("scripted pilots carry a controller");
            Ok(ctl
                .command(eng.own(), eng.oppo(), &cfg.own_airframe, cfg.dt())
                .to_array())
        }
    }
}

fn controller(pilot: &Pilot<'_>, seed: u64) -> Option<OpponentController> {
    match pilot {
        Pilot::Scripted(p) => Some(OpponentController::new(*p, seed ^ 0x0_ca11_5196)),
        Pilot::Policy(_) => None,
    }
}

/// Runs `episodes` evaluation-spawn episodes against `opponent`; episode `i`
/// uses seed `seed + i`.
pub fn evaluate(
    pilot: Pilot<'_>,
    net: &NetworkConfig,
    base: &EpisodeConfig,
    opponent: OpponentPolicy,
    episodes: usize,
    seed: u64,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(CoreError::Contract("episodes must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(episodes);
    for i in 0..episodes {
        let ep_seed = seed.wrapping_add(i as u64);
        let mut env = DogfightEnv::new(evaluation_config(base, opponent, ep_seed));
        let mut script = controller(&pilot, ep_seed);
        let mut total_reward = 0.0;
        let steps = play(
            &mut env,
            net,
            ep_seed,
            |env, h| pilot_action(&pilot, &mut script, env, h),
            |_, out, warm, _| {
                if !warm {
                    total_reward += out.reward;
                }
            },
        )?;
        let eng = env.engagement().expect("played episode");
        rows.push(EpisodeRow {
            episode: i,
            seed: ep_seed,
            steps,
            termination: eng.termination(),
            own_life: eng.own().life,
            oppo_life: eng.oppo().life,
            total_reward,
        });
    }
    EvalReport::from_rows(rows)
}

/// Mean undiscounted return of deterministic episodes in any environment,
/// counting policy-controlled steps only.
pub fn mean_return<E: Environment + ?Sized>(env: &mut E, actor: &Actor, seeds: &[u64]) -> Result<f64> {
    let mut total = 0.0;
    for &seed in seeds {
        play(
            env,
            actor.config(),
            seed,
            |_, h| {
                let (s_l, s_s) = views(h)?;
                Ok(actor.infer(&s_l, &s_s)?[0].mode())
            },
            |_, out, warm, _| {
                if !warm {
                    total += out.reward;
                }
            },
        )?;
    }
    Ok(total / seeds.len().max(1) as f64)
}

/// First line of every exported trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceHeader {
    pub format: String,
    pub episode: usize,
    pub seed: u64,
    pub pilot: String,
    pub opponent: OpponentPolicy,
    pub step_rate_hz: f64,
    pub warm_up_steps: usize,
}

pub const TRACE_FORMAT: &str = "tempfuser-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub file: String,
    pub seed: u64,
    pub steps: usize,
    pub termination: Termination,
    pub own_life: u8,
    pub oppo_life: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub pilot: String,
    pub opponent: OpponentPolicy,
    pub episodes: Vec<ManifestEntry>,
}

/// Writes `episode_NNN.jsonl` (header line, then one record per step) for
/// each episode and a `manifest.json`. On failure every file written so far
/// is removed.
pub fn export_trajectories(
    pilot: Pilot<'_>,
    net: &NetworkConfig,
    base: &EpisodeConfig,
    opponent: OpponentPolicy,
    episodes: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Manifest> {
    let mut written: Vec<PathBuf> = Vec::new();
    let result = export_into(pilot, net, base, opponent, episodes, seed, out_dir, &mut written);
    if result.is_err() {
        for p in &written {
            let _ = std::fs::remove_file(p);
        }
    }
    result
}

#[allow(clippy::too_many_arguments)]
fn export_into(
    pilot: Pilot<'_>,
    net: &NetworkConfig,
    base: &EpisodeConfig,
    opponent: OpponentPolicy,
    episodes: usize,
    seed: u64,
    out_dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<Manifest> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut manifest = Manifest {
        format: TRACE_FORMAT.to_string(),
        pilot: pilot.name(),
        opponent,
        episodes: Vec::with_capacity(episodes),
    };
    for i in 0..episodes {
        let ep_seed = seed.wrapping_add(i as u64);
        let config = evaluation_config(base, opponent, ep_seed);
        let name = format!("episode_{i:03}.jsonl");
        let path = out_dir.join(&name);
        let file = File::create(&path).map_err(io_err(&path))?;
        written.push(path.clone());
        let mut out = BufWriter::new(file);
        let header = TraceHeader {
            format: TRACE_FORMAT.to_string(),
            episode: i,
            seed: ep_seed,
            pilot: pilot.name(),
            opponent,
            step_rate_hz: config.step_rate_hz,
            warm_up_steps: net.warm_up(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n").map_err(io_err(&path))?;

        let mut env = DogfightEnv::new(config);
        let mut script = controller(&pilot, ep_seed);
        let mut write_err = None;
        let steps = play(
            &mut env,
            net,
            ep_seed,
            |env, h| pilot_action(&pilot, &mut script, env, h),
            |env, _, _, _| {
                let eng = env.engagement().expect("stepping engagement");
                let report = env.last_report().expect("stepped at least once");
                let rec = TraceRecord::new(report, eng.own(), eng.oppo());
                if write_err.is_none() {
                    write_err = rec.write_line(&mut out).err();
                }
            },
        )?;
        if let Some(e) = write_err {
            return Err(io_err(&path)(e));
        }
        out.flush().map_err(io_err(&path))?;
        let eng = env.engagement().expect("played episode");
        manifest.episodes.push(ManifestEntry {
            file: name,
            seed: ep_seed,
            steps,
            termination: eng.termination(),
            own_life: eng.own().life,
            oppo_life: eng.oppo().life,
        });
    }
    let mpath = out_dir.join("manifest.json");
    written.push(mpath.clone());
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(io_err(&mpath))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(termination: Termination, own_life: u8, oppo_life: u8) -> EpisodeRow {
        EpisodeRow {
            episode: 0,
            seed: 0,
            steps: 100,
            termination,
            own_life,
            oppo_life,
            total_reward: 0.0,
        }
    }

    #[test]
    fn hand_computed_fixture() {
        // a win with 15 of 20 life left, and a loss after removing 8 opponent lives
        let r = EvalReport::from_rows(vec![row(Termination::OwnWin, 15, 0), row(Termination::OppoWin, 0, 12)]).unwrap();
        assert_eq!(r.win_pct, 50.0);
        assert_eq!(r.lose_pct, 50.0);
        assert_eq!(r.draw_pct, 0.0);
        assert_eq!(r.damage_pct, (100.0 + 40.0) / 2.0);
        assert_eq!(r.life_pct, (75.0 + 0.0) / 2.0);
        assert_eq!(r.damage_points(), 28);
    }

    #[test]
    fn crashes_and_timeouts_are_classified() {
        let r = EvalReport::from_rows(vec![
            row(Termination::CrashOppo, 20, 20),
            row(Termination::CrashOwn, 20, 20),
            row(Termination::Timeout, 20, 20),
        ])
        .unwrap();
        assert!((r.win_pct + r.lose_pct + r.draw_pct - 100.0).abs() < 1e-9);
        assert_eq!(r.damage_pct, 0.0);
        assert_eq!(r.life_pct, 100.0);
        assert!(EvalReport::from_rows(vec![row(Termination::None, 1, 1)]).is_err());
        assert!(EvalReport::from_rows(Vec::new()).is_err());
    }

    #[test]
    fn flawless_wins() {
        let r = EvalReport::from_rows(vec![row(Termination::OwnWin, 20, 0); 3]).unwrap();
        assert_eq!((r.win_pct, r.life_pct, r.damage_pct), (100.0, 100.0, 100.0));
    }
}
