//! Actor checkpoints: `TFZ1` weights plus a JSON sidecar describing the
//! network, so a checkpoint can be loaded without the run configuration.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tempfuser_nd::checkpoint::{self, Precision};
use tempfuser_nd::params::manifest_diff;
use tempfuser_sim::EpisodeConfig;

use crate::config::NetworkConfig;
use crate::error::{io_err, CoreError, Result};
use crate::policy::Actor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointMeta {
    pub network: NetworkConfig,
    pub episode: u64,
    pub env_steps: u64,
    /// Dogfight settings the actor was trained under, if any.
    pub episode_config: Option<EpisodeConfig>,
}

/// `actor.tfz` → `actor.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn save_actor(path: &Path, actor: &Actor, meta: &CheckpointMeta) -> Result<()> {
    let p = actor.params();
    let bytes = checkpoint::encode(p.names().iter().map(String::as_str).zip(p.tensors()), Precision::F32);
    write_atomic(path, &bytes)?;
    write_atomic(&sidecar_path(path), serde_json::to_string_pretty(meta)?.as_bytes())
}

pub fn load_actor(path: &Path) -> Result<(Actor, CheckpointMeta)> {
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    let entries = checkpoint::load(path).map_err(|e| CoreError::Checkpoint(format!("{}: {e}", path.display())))?;
    // weights are overwritten below; the seed only fixes the shapes
    let mut actor = Actor::new(&meta.network, &mut ChaCha8Rng::seed_from_u64(0))?;
    let found: Vec<(String, Vec<usize>)> = entries.iter().map(|(n, t)| (n.clone(), t.shape().to_vec())).collect();
    let diff = manifest_diff(&actor.params().manifest(), &found);
    if !diff.is_empty() {
        return Err(CoreError::Checkpoint(format!(
            "{} does not match its network description: {}",
            path.display(),
            diff.join("; ")
        )));
    }
    actor.params_mut().load_named(&entries)?;
    Ok((actor, meta))
}

/// Writes through a temporary file and a rename, so readers never see a
/// half-written file.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ActorArch;

    fn net(arch: ActorArch) -> NetworkConfig {
        NetworkConfig {
            arch,
            d: 8,
            layers: 1,
            heads: 2,
            n_s: 2,
            n_l: 2,
            stride: 2,
            ..NetworkConfig::default()
        }
    }

    fn meta(arch: ActorArch) -> CheckpointMeta {
        CheckpointMeta {
            network: net(arch),
            episode: 3,
            env_steps: 99,
            episode_config: None,
        }
    }

    #[test]
    fn round_trip_keeps_f32_weights() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.tfz");
        let actor = Actor::new(&net(ActorArch::TempFuser), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        save_actor(&path, &actor, &meta(ActorArch::TempFuser)).unwrap();
        let (back, m) = load_actor(&path).unwrap();
        assert_eq!(m, meta(ActorArch::TempFuser));
        for (a, b) in actor.params().tensors().iter().zip(back.params().tensors()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(*y, *x as f32 as f64);
            }
        }
    }

    #[test]
    fn mismatched_sidecar_reports_the_manifest_diff() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.tfz");
        let actor = Actor::new(&net(ActorArch::Lstm), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        save_actor(&path, &actor, &meta(ActorArch::Lstm)).unwrap();
        std::fs::write(
            sidecar_path(&path),
            serde_json::to_string(&meta(ActorArch::LsLstm)).unwrap(),
        )
        .unwrap();
        let err = load_actor(&path).unwrap_err().to_string();
        assert!(err.contains("missing long.proj.weight"), "{err}");
    }

    #[test]
    fn corrupt_weights_are_a_checkpoint_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.tfz");
        let actor = Actor::new(&net(ActorArch::Lstm), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        save_actor(&path, &actor, &meta(ActorArch::Lstm)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(load_actor(&path), Err(CoreError::Checkpoint(_))));
    }
}
