//! Seeded simulation environments with raw-array sensor observations.
//!
//! All tasks share one lifecycle: `reset(seed)` rolls episode-specific state
//! from the seed, `step(action)` advances until the outcome reports
//! `terminated` (environment end, no bootstrapping past it) or `truncated`
//! (timeout cut-off; values may still bootstrap). Identical seeds and action
//! sequences replay bit-identically.

mod capture;
mod chain;
mod memory_cue;
mod reach1d;
mod sensors;

pub use capture::{render_sensors, CaptureConfig, CaptureEnv, Rect, SensorPreset, WorldState};
pub use chain::{chain_value_iteration, ChainConfig, ChainEnv, CHAIN_ACTIONS, CHAIN_STATES};
pub use memory_cue::{MemoryCueConfig, MemoryCueEnv, MEMORY_OBS};
pub use reach1d::{Reach1dConfig, Reach1dEnv};
pub use sensors::{GridSpec, SensorConfig};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rl::{ActionSpec, HybridAction};

/// How an episode finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    /// Capture task: capture action landed within the capture radius.
    Capture,
    /// Capture task: capture action missed.
    Fail,
    /// Episode hit its step limit (or the object left the field).
    Timeout,
    /// Goal tasks: correct terminal choice or target reached.
    Goal,
    /// Memory task: wrong terminal choice.
    Wrong,
}

/// Ground-truth diagnostics attached to every step. Fields are task
/// dependent; absent ones serialize away.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_x: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_y: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_vx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_vy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub visible: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cue: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<Outcome>,
}

/// Observation, reward, and lifecycle flags for one step (or a reset).
#[derive(Debug, Clone, PartialEq)]
pub struct EnvOutcome {
    pub observation: Vec<f64>,
    pub reward: f64,
    /// Environment-terminal: no successor value exists.
    pub terminated: bool,
    /// Cut off (timeout); the successor value may still bootstrap.
    pub truncated: bool,
    pub info: StepInfo,
}

impl EnvOutcome {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

/// Uniform reset/step/sensor contract all tasks honor.
pub trait Environment {
    fn observation_size(&self) -> usize;
    fn action_spec(&self) -> ActionSpec;
    /// Hard upper bound on episode length.
    fn t_max(&self) -> usize;
    /// Start a new episode; all randomization derives from `seed`.
    fn reset(&mut self, seed: u64) -> Result<EnvOutcome>;
    /// Advance one step. Stepping a finished episode is a lifecycle error.
    fn step(&mut self, action: &HybridAction) -> Result<EnvOutcome>;
}

/// Task selector with per-task parameters; the `name` key picks the task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Capture(CaptureConfig),
    MemoryCue(MemoryCueConfig),
    Reach1d(Reach1dConfig),
    ChainMdp(ChainConfig),
}

impl TaskConfig {
    pub fn task_name(&self) -> &'static str {
        match self {
            TaskConfig::Capture(_) => "capture",
            TaskConfig::MemoryCue(_) => "memory_cue",
            TaskConfig::Reach1d(_) => "reach1d",
            TaskConfig::ChainMdp(_) => "chain_mdp",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TaskConfig::Capture(c) => c.validate(),
            TaskConfig::MemoryCue(c) => c.validate(),
            TaskConfig::Reach1d(c) => c.validate(),
            TaskConfig::ChainMdp(c) => c.validate(),
        }
    }
}

/// Instantiate the environment a config describes.
pub fn make_task(config: &TaskConfig) -> Result<Box<dyn Environment>> {
    config.validate()?;
    Ok(match config {
        TaskConfig::Capture(c) => Box::new(CaptureEnv::new(c.clone())?),
        TaskConfig::MemoryCue(c) => Box::new(MemoryCueEnv::new(c.clone())?),
        TaskConfig::Reach1d(c) => Box::new(Reach1dEnv::new(c.clone())?),
        TaskConfig::ChainMdp(c) => Box::new(ChainEnv::new(c.clone())?),
    })
}
