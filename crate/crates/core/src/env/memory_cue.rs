//! Delayed-cue memory task.
//!
//! A two-valued cue is shown only on step 0. After `delay` steps of blank,
//! cue-independent observations, a go flag appears and the agent must pick
//! the terminal choice matching the cue. For any delay >= 1 the observation
//! at decision time is byte-identical across cues, so beating chance
//! requires carrying the cue in recurrent state. Delay 0 shows cue and go
//! together, making the task solvable by a feedforward network.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{ActionSpec, HybridAction};

use super::{EnvOutcome, Environment, Outcome, StepInfo};

/// Observation layout: `[cue_a, cue_b, go]`.
pub const MEMORY_OBS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MemoryCueConfig {
    /// Blank steps between the cue and the go flag.
    pub delay: usize,
    pub r_goal: f64,
    pub r_wrong: f64,
}

impl Default for MemoryCueConfig {
    fn default() -> Self {
        MemoryCueConfig {
            delay: 10,
            r_goal: 0.9,
            r_wrong: -0.1,
        }
    }
}

impl MemoryCueConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_goal.is_finite() && self.r_wrong.is_finite()) {
            return Err(Error::Config("memory_cue: non-finite rewards".into()));
        }
        Ok(())
    }
}

pub struct MemoryCueEnv {
    config: MemoryCueConfig,
    cue: u8,
    step: usize,
    done: bool,
    started: bool,
}

impl MemoryCueEnv {
    pub fn new(config: MemoryCueConfig) -> Result<Self> {
        config.validate()?;
        Ok(MemoryCueEnv {
            config,
            cue: 0,
            step: 0,
            done: true,
            started: false,
        })
    }

    pub fn cue(&self) -> u8 {
        self.cue
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; MEMORY_OBS];
        if self.step == 0 {
            obs[self.cue as usize] = 1.0;
        }
        if self.step == self.config.delay {
            obs[2] = 1.0;
        }
        obs
    }

    fn info(&self, outcome: Option<Outcome>) -> StepInfo {
        StepInfo {
            cue: Some(self.cue),
            outcome,
            ..StepInfo::default()
        }
    }
}

impl Environment for MemoryCueEnv {
    fn observation_size(&self) -> usize {
        MEMORY_OBS
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec {
            discrete: 2,
            motors: 0,
            motor_action: None,
            motor_limit: 0.0,
        }
    }

    fn t_max(&self) -> usize {
        self.config.delay + 1
    }

    fn reset(&mut self, seed: u64) -> Result<EnvOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.cue = rng.random_range(0..2u8);
        self.step = 0;
        self.done = false;
        self.started = true;
        Ok(EnvOutcome {
            observation: self.observe(),
            reward: 0.0,
            terminated: false,
            truncated: false,
            info: self.info(None),
        })
    }

    fn step(&mut self, action: &HybridAction) -> Result<EnvOutcome> {
        if !self.started || self.done {
            return Err(Error::Lifecycle(
                "step on a finished episode; call reset first".into(),
            ));
        }
        let choice = match action {
            HybridAction::Discrete(i) if *i < 2 => *i as u8,
            HybridAction::Discrete(i) => {
                return Err(Error::Shape(format!(
                    "memory_cue has two discrete actions, got index {i}"
                )))
            }
            HybridAction::Continuous(_) => {
                return Err(Error::Shape(
                    "memory_cue takes discrete actions only".into(),
                ))
            }
        };
        if self.step < self.config.delay {
            // Pre-decision steps: the choice is ignored.
            self.step += 1;
            return Ok(EnvOutcome {
                observation: self.observe(),
                reward: 0.0,
                terminated: false,
                truncated: false,
                info: self.info(None),
            });
        }
        let correct = choice == self.cue;
        self.done = true;
        self.step += 1;
        Ok(EnvOutcome {
            observation: vec![0.0; MEMORY_OBS],
            reward: if correct {
                self.config.r_goal
            } else {
                self.config.r_wrong
            },
            terminated: true,
            truncated: false,
            info: self.info(Some(if correct { Outcome::Goal } else { Outcome::Wrong })),
        })
    }
}
