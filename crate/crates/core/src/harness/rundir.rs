//! Run-directory layout and file IO.
//!
//! ```text
//! <out_dir>/
//!   config.toml                  canonical config copy
//!   manifest.json                status, config hash, seed, timestamps
//!   episodes.jsonl               one EpisodeLog per training episode
//!   evals.jsonl                  one EvalRecord per periodic evaluation
//!   checkpoints/ckpt_<ep>.weights   network checkpoint (text, checksummed)
//!   checkpoints/ckpt_<ep>.state     generator/loop state (checksummed)
//!   trajectories/<label>/ep_<i>.jsonl   per-episode greedy rollout dumps
//! ```
//!
//! Everything except the manifest's timestamps is a pure function of
//! (config, seed), so reruns and resumed runs are byte-identical.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{Outcome, StepInfo};
use crate::error::{Error, Result};
use crate::net::hex_digest;
use crate::rl::HybridAction;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const EVALS_FILE: &str = "evals.jsonl";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const TRAJECTORY_DIR: &str = "trajectories";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Aborted,
}

/// Run metadata; the only file allowed to differ between identical reruns,
/// and then only in its timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub episodes: usize,
    pub config_sha256: String,
    pub status: RunStatus,
    /// Episode count at the most recent checkpoint.
    pub latest_checkpoint: Option<usize>,
    pub created_at_unix: u64,
    pub updated_at_unix: u64,
}

impl Manifest {
    pub fn new(seed: u64, episodes: usize, config_sha256: String) -> Self {
        let now = unix_now();
        Manifest {
            version: 1,
            seed,
            episodes,
            config_sha256,
            status: RunStatus::Running,
            latest_checkpoint: None,
            created_at_unix: now,
            updated_at_unix: now,
        }
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        fs::write(run_dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Err(Error::NoData(format!(
                "{} is not a run directory (no manifest)",
                run_dir.display()
            )));
        }
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Integrity(format!("manifest parse: {e}")))
    }

    pub fn touch(&mut self) {
        self.updated_at_unix = unix_now();
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Per-episode training log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodeLog {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub outcome: Outcome,
    pub steps: usize,
    pub mean_abs_td: f64,
}

/// Summary of one periodic greedy evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    /// Training episodes completed when this evaluation ran.
    pub episode: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_return: f64,
    pub mean_steps: f64,
    pub seed: u64,
}

/// One step of a greedy rollout dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRecord {
    pub step: usize,
    pub action: HybridAction,
    pub reward: f64,
    #[serde(flatten)]
    pub info: StepInfo,
}

/// Loop state saved beside each weight checkpoint: where the RNG streams
/// stand and how many episodes are done. A trailing checksum guards the
/// payload like the weight files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunState {
    pub episode: usize,
    pub explore_word_pos: u128,
    pub env_word_pos: u128,
}

impl RunState {
    pub fn save(&self, path: &Path) -> Result<()> {
        let payload = serde_json::to_string(self).expect("state serializes");
        let digest = hex_digest(&Sha256::digest(payload.as_bytes()));
        fs::write(path, format!("{payload}\nchecksum: {digest}\n"))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let (payload, checksum_line) = text
            .split_once('\n')
            .ok_or_else(|| Error::Integrity("run state file is truncated".into()))?;
        let stored = checksum_line
            .trim()
            .strip_prefix("checksum: ")
            .ok_or_else(|| Error::Integrity("run state is missing its checksum".into()))?;
        let digest = hex_digest(&Sha256::digest(payload.as_bytes()));
        if stored != digest {
            return Err(Error::Integrity(
                "run state checksum mismatch (file corrupted or edited)".into(),
            ));
        }
        serde_json::from_str(payload)
            .map_err(|e| Error::Integrity(format!("run state parse: {e}")))
    }
}

/// Append-only JSONL writer with deterministic content.
pub struct JsonlWriter {
    file: fs::File,
}

impl JsonlWriter {
    pub fn append(path: &Path) -> Result<Self> {
        let file = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(JsonlWriter { file })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("record serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        Ok(())
    }
}

/// Read a JSONL file into records; a missing file reads as empty.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .map_err(|e| Error::Integrity(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

/// Rewrite a JSONL file keeping only the records a predicate accepts,
/// preserving their original bytes.
pub fn truncate_jsonl(path: &Path, keep: impl Fn(&serde_json::Value) -> bool) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let reader = BufReader::new(fs::File::open(path)?);
    let mut kept = String::new();
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| Error::Integrity(format!("{}: {e}", path.display())))?;
        if keep(&value) {
            kept.push_str(&line);
            kept.push('\n');
        }
    }
    fs::write(path, kept)?;
    Ok(())
}

pub fn checkpoint_weights_path(run_dir: &Path, episode: usize) -> PathBuf {
    run_dir
        .join(CHECKPOINT_DIR)
        .join(format!("ckpt_{episode:08}.weights"))
}

pub fn checkpoint_state_path(run_dir: &Path, episode: usize) -> PathBuf {
    run_dir
        .join(CHECKPOINT_DIR)
        .join(format!("ckpt_{episode:08}.state"))
}

pub fn trajectory_dir(run_dir: &Path, label: &str) -> PathBuf {
    run_dir.join(TRAJECTORY_DIR).join(label)
}

pub fn trajectory_episode_path(dir: &Path, episode: usize) -> PathBuf {
    dir.join(format!("ep_{episode:06}.jsonl"))
}
