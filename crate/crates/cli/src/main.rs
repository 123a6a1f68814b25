//! `tempfuser`: train, evaluate and export TempFuser pilots.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when the command fails.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{error::ErrorKind, Parser, Subcommand};
use tempfuser_core::checkpoint::load_actor;
use tempfuser_core::eval::{evaluate, export_trajectories, Pilot};
use tempfuser_core::{gradsuite, RunConfig, Trainer};
use tempfuser_sim::{EpisodeConfig, OpponentPolicy};

#[derive(Debug, Parser)]
#[command(
    name = "tempfuser",
    about = "Long/short-term temporal fusion pilots for simulated air combat"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train from a JSON run configuration, or resume a run directory.
    Train {
        #[arg(long, required_unless_present = "resume", conflicts_with = "resume")]
        config: Option<PathBuf>,
        /// Output directory of an interrupted run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many further episodes instead of the step budget.
        #[arg(long)]
        episodes: Option<u64>,
    },
    /// Evaluate an actor checkpoint with deterministic actions.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "pure_pursuit")]
        opponent: OpponentPolicy,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also print every episode.
        #[arg(long)]
        verbose: bool,
    },
    /// Write JSON-lines traces of evaluation episodes.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "pure_pursuit")]
        opponent: OpponentPolicy,
        #[arg(long, default_value_t = 5)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the finite-difference gradient suite.
    Gradcheck {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Train {
            config,
            resume,
            episodes,
        } => {
            let mut trainer = match (config, resume) {
                (Some(path), None) => Trainer::new(RunConfig::load(&path)?)?,
                (None, Some(dir)) => Trainer::resume(&dir)?,
                _ => unreachable!("clap enforces exactly one of --config and --resume"),
            };
            let report = |r: &tempfuser_core::MetricsRow| {
                println!(
                    "episode {:>6}  steps {:>9}  damage {:>6.3}  win {:>5.3}  eval_return {:>10.3}  reward {:>10.3}  alpha {:.4}  q {:.4}/{:.4}  pi {:.4}",
                    r.episode, r.env_steps, r.eval_damage_ratio, r.eval_win_rate, r.eval_return, r.mean_reward, r.alpha, r.q1_loss, r.q2_loss, r.pi_loss
                );
            };
            match episodes {
                Some(n) => trainer.run_episodes(n, report)?,
                None => trainer.run(report)?,
            }
            if trainer.faults() > 0 {
                eprintln!("{} episodes were discarded after simulator faults", trainer.faults());
            }
            println!("metrics written to {}", trainer.metrics_path().display());
        }
        Command::Evaluate {
            checkpoint,
            opponent,
            episodes,
            seed,
            verbose,
        } => {
            let (actor, meta) = load_actor(&checkpoint)?;
            let base = meta.episode_config.unwrap_or_default();
            let report = evaluate(Pilot::Policy(&actor), &meta.network, &base, opponent, episodes, seed)?;
            if verbose {
                for r in &report.rows {
                    println!(
                        "episode {:>4} seed {:>6} steps {:>5} {:<10} own {:>2} oppo {:>2} reward {:.3}",
                        r.episode,
                        r.seed,
                        r.steps,
                        r.termination.name(),
                        r.own_life,
                        r.oppo_life,
                        r.total_reward
                    );
                }
            }
            println!(
                "{} vs {opponent}, {} episodes: win {:.1}%  lose {:.1}%  draw {:.1}%  damage {:.1}%  life {:.1}%",
                meta.network.arch.name(),
                report.episodes,
                report.win_pct,
                report.lose_pct,
                report.draw_pct,
                report.damage_pct,
                report.life_pct
            );
        }
        Command::Export {
            checkpoint,
            out,
            opponent,
            episodes,
            seed,
        } => {
            let (actor, meta) = load_actor(&checkpoint)?;
            let base: EpisodeConfig = meta.episode_config.unwrap_or_default();
            let manifest = export_trajectories(
                Pilot::Policy(&actor),
                &meta.network,
                &base,
                opponent,
                episodes,
                seed,
                &out,
            )
            .with_context(|| format!("exporting to {}", out.display()))?;
            println!("wrote {} traces to {}", manifest.episodes.len(), out.display());
        }
        Command::Gradcheck { seed } => {
            let cases = gradsuite::run(seed)?;
            let mut failed = 0;
            for c in &cases {
                println!(
                    "{:<4} {:<36} probes {:>4}  max rel err {:.3e}",
                    if c.passed { "ok" } else { "FAIL" },
                    c.name,
                    c.checked,
                    c.max_rel_err
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} gradient checks failed", cases.len());
            }
            println!("all {} gradient checks passed", cases.len());
        }
        Command::Version => println!("tempfuser {}", env!("CARGO_PKG_VERSION")),
    }
    Ok(())
}
