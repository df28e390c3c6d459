//! TD-family learners.
//!
//! Rewards are converted into masked per-output training signals: Q-learning
//! over discrete choices, actor-critic for continuous motor commands, and
//! the Actor-Q hybrid where Q outputs pick `capture` vs `move` and two actor
//! outputs supply the motor command whenever `move` wins. Updates are
//! on-policy and online — no replay buffer, no target network.

mod learner;
mod td;

pub use learner::{Learner, StepDecision, StepValues};
pub use td::{actor_training_signal, q_target, select_discrete, td_error};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Either a discrete action index or a continuous motor-command vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HybridAction {
    Discrete(usize),
    Continuous(Vec<f64>),
}

/// What a task accepts as actions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSpec {
    /// Number of discrete actions (0 for purely continuous tasks).
    pub discrete: usize,
    /// Number of continuous motor components (0 for purely discrete tasks).
    pub motors: usize,
    /// For hybrid tasks, the discrete action whose selection hands control
    /// to the motor outputs.
    pub motor_action: Option<usize>,
    /// Symmetric actuator limit: each motor component is clamped to
    /// [-motor_limit, +motor_limit] before execution.
    pub motor_limit: f64,
}

/// One environment interaction, as seen by the learner.
#[derive(Debug, Clone)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub action: HybridAction,
    /// The exploration perturbation actually executed (after clamping);
    /// empty or all-zero when no motor command was issued.
    pub applied_noise: Vec<f64>,
    pub reward: f64,
    pub next_observation: Vec<f64>,
    /// True only for environment-terminal transitions: no successor value
    /// is bootstrapped. Truncations (timeouts) keep this false.
    pub terminal: bool,
}

/// Piecewise-linear schedule over episodes, non-increasing by contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub start: f64,
    pub end: f64,
    pub decay_episodes: usize,
}

impl Schedule {
    pub fn constant(v: f64) -> Self {
        Schedule {
            start: v,
            end: v,
            decay_episodes: 1,
        }
    }

    pub fn value(&self, episode: usize) -> f64 {
        if self.decay_episodes == 0 || episode >= self.decay_episodes {
            return self.end;
        }
        let f = episode as f64 / self.decay_episodes as f64;
        self.start + (self.end - self.start) * f
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !(self.start.is_finite() && self.end.is_finite()) {
            return Err(Error::Config(format!("{name} schedule has non-finite values")));
        }
        if self.end > self.start {
            return Err(Error::Config(format!(
                "{name} schedule must be non-increasing (start {} < end {})",
                self.start, self.end
            )));
        }
        Ok(())
    }
}

/// Which TD learner drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    QLearning,
    ActorCritic,
    ActorQ,
}

/// Hyperparameters shared by all learner kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub kind: LearnerKind,
    /// TD discount factor, in [0, 1).
    pub discount: f64,
    /// Online learning rate handed to the network updates.
    pub lr_net: f64,
    /// Epsilon-greedy exploration probability for discrete choices.
    pub epsilon: Schedule,
    /// Standard deviation of the Gaussian exploration noise added to motor
    /// commands.
    pub noise_sigma: Schedule,
    /// Scale mapping value targets (reward units) into the activation range.
    pub q_scale: f64,
    /// Step size of the perturbation-reinforcement actor update.
    pub actor_gain: f64,
    /// BPTT truncation window; `None` propagates through whole episodes.
    pub bptt_window: Option<usize>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: LearnerKind::ActorQ,
            discount: 0.96,
            lr_net: 0.1,
            epsilon: Schedule {
                start: 1.0,
                end: 0.05,
                decay_episodes: 1,
            },
            noise_sigma: Schedule {
                start: 0.1,
                end: 0.02,
                decay_episodes: 1,
            },
            q_scale: 0.4,
            actor_gain: 1.0,
            bptt_window: None,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::Config(format!(
                "discount must be in [0, 1), got {}",
                self.discount
            )));
        }
        if !(self.lr_net.is_finite() && self.lr_net > 0.0) {
            return Err(Error::Config(format!(
                "lr_net must be positive, got {}",
                self.lr_net
            )));
        }
        if !(self.q_scale.is_finite() && self.q_scale > 0.0) {
            return Err(Error::Config(format!(
                "q_scale must be positive, got {}",
                self.q_scale
            )));
        }
        if !(self.actor_gain.is_finite() && self.actor_gain > 0.0) {
            return Err(Error::Config(format!(
                "actor_gain must be positive, got {}",
                self.actor_gain
            )));
        }
        self.epsilon.validate("epsilon")?;
        if self.epsilon.start > 1.0 || self.epsilon.end < 0.0 {
            return Err(Error::Config("epsilon schedule must stay in [0, 1]".into()));
        }
        self.noise_sigma.validate("noise_sigma")?;
        if self.noise_sigma.end < 0.0 {
            return Err(Error::Config("noise_sigma must be non-negative".into()));
        }
        if self.bptt_window == Some(0) {
            return Err(Error::Config("bptt_window must be at least 1".into()));
        }
        Ok(())
    }
}
