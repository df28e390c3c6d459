//! Experiment configuration: a TOML document with `run`, `task`, `network`,
//! and `learner` tables. Unknown keys are rejected everywhere — a silently
//! ignored typo is a corrupted experiment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activation::{ActivationKind, ActivationSpec};
use crate::env::TaskConfig;
use crate::error::{Error, Result};
use crate::net::RecurrentInit;
use crate::rl::LearnerConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub task: TaskConfig,
    pub network: NetworkConfig,
    pub learner: LearnerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub episodes: usize,
    /// Evaluate and checkpoint every this many episodes.
    pub eval_every: usize,
    /// Greedy episodes per periodic evaluation.
    pub eval_episodes: usize,
    /// Greedy episodes for the final evaluation; defaults to eval_episodes.
    pub final_eval_episodes: Option<usize>,
    /// Write per-episode trajectory dumps for the final evaluation.
    pub dump_trajectories: bool,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            episodes: 1000,
            eval_every: 200,
            eval_episodes: 100,
            final_eval_episodes: None,
            dump_trajectories: true,
            out_dir: PathBuf::from("runs/out"),
        }
    }
}

/// How the recurrent matrix is filled at init time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecurrentInitKind {
    Identity,
    Zero,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Hidden layer sizes; input and output sizes come from the task and
    /// learner.
    pub hidden: Vec<usize>,
    pub recurrent: bool,
    pub activation: ActivationKind,
    pub output_scale: f64,
    /// Uniform init range for the layer weights.
    pub init_range: f64,
    pub recurrent_init: RecurrentInitKind,
    /// Gain of the identity feedback initialization.
    pub identity_gain: f64,
    /// Uniform range when recurrent_init = "uniform".
    pub recurrent_range: f64,
    pub train_bias: bool,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![30],
            recurrent: true,
            activation: ActivationKind::SymmetricSigmoid,
            output_scale: 1.0,
            init_range: 0.3,
            recurrent_init: RecurrentInitKind::Identity,
            identity_gain: 1.0,
            recurrent_range: 0.1,
            train_bias: true,
        }
    }
}

impl NetworkConfig {
    pub fn activation_spec(&self) -> ActivationSpec {
        ActivationSpec {
            kind: self.activation,
            output_scale: self.output_scale,
        }
    }

    pub fn recurrent_init(&self) -> Option<RecurrentInit> {
        if !self.recurrent {
            return None;
        }
        Some(match self.recurrent_init {
            RecurrentInitKind::Identity => RecurrentInit::IdentityFeedback {
                gain: self.identity_gain,
            },
            RecurrentInitKind::Zero => RecurrentInit::Zero,
            RecurrentInitKind::Uniform => RecurrentInit::Uniform {
                range: self.recurrent_range,
            },
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.activation_spec().validate()?;
        if self.recurrent && self.hidden.is_empty() {
            return Err(Error::Config(
                "a recurrent network needs at least one hidden layer".into(),
            ));
        }
        if self.hidden.iter().any(|&n| n == 0) {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::Config("init_range must be non-negative".into()));
        }
        if self.recurrent && !(self.identity_gain.is_finite() && self.identity_gain > 0.0) {
            return Err(Error::Config("identity_gain must be positive".into()));
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        self.network.validate()?;
        self.learner.validate()?;
        if self.run.eval_every == 0 {
            return Err(Error::Config("eval_every must be at least 1".into()));
        }
        if self.run.eval_episodes == 0 {
            return Err(Error::Config("eval_episodes must be at least 1".into()));
        }
        if self.run.final_eval_episodes == Some(0) {
            return Err(Error::Config("final_eval_episodes must be at least 1".into()));
        }
        if self.run.out_dir.as_os_str().is_empty() {
            return Err(Error::Config("out_dir must not be empty".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Canonical serialization: what gets written into the run directory and
    /// hashed into the manifest.
    pub fn to_canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_toml().as_bytes());
        crate::net::hex_digest(&digest)
    }
}
