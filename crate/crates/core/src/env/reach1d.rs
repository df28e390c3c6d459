//! 1-D reaching task for the actor-critic path.
//!
//! The agent starts mid-range and must drive its position onto a randomly
//! placed target using a single continuous motor command. Observations are
//! two 1-D receptive-field layers (own position, target position), reward is
//! paid only on arrival within the goal radius.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{ActionSpec, HybridAction};

use super::sensors::GridSpec;
use super::{EnvOutcome, Environment, Outcome, StepInfo};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Reach1dConfig {
    /// Position interval the agent can occupy.
    pub range: (f64, f64),
    /// Start-position interval. Randomized per episode so the critic always
    /// sees position variation; an agent camping on a wall otherwise starves
    /// its own value gradient.
    pub start_range: (f64, f64),
    /// Target interval, inset from the walls.
    pub target_range: (f64, f64),
    /// World units per step per unit of motor command.
    pub motion_scale: f64,
    /// Arrival distance (boundary counts as arrived).
    pub goal_radius: f64,
    pub t_max: usize,
    pub r_goal: f64,
    /// Cells per receptive-field layer.
    pub cells: usize,
}

impl Default for Reach1dConfig {
    fn default() -> Self {
        Reach1dConfig {
            range: (0.0, 3.0),
            start_range: (0.2, 2.8),
            target_range: (0.4, 2.6),
            motion_scale: 0.5,
            goal_radius: 0.15,
            t_max: 40,
            r_goal: 0.9,
            cells: 8,
        }
    }
}

impl Reach1dConfig {
    pub fn validate(&self) -> Result<()> {
        if self.range.1 <= self.range.0 {
            return Err(Error::Config("reach1d: empty position range".into()));
        }
        if self.target_range.1 < self.target_range.0 {
            return Err(Error::Config("reach1d: empty target range".into()));
        }
        if self.start_range.1 < self.start_range.0 {
            return Err(Error::Config("reach1d: empty start range".into()));
        }
        if self.motion_scale <= 0.0 || self.goal_radius <= 0.0 || self.t_max == 0 {
            return Err(Error::Config(
                "reach1d: motion_scale, goal_radius, and t_max must be positive".into(),
            ));
        }
        if self.cells < 2 {
            return Err(Error::Config("reach1d: need at least 2 cells per layer".into()));
        }
        Ok(())
    }

    fn layer(&self) -> GridSpec {
        GridSpec {
            nx: 1,
            ny: self.cells,
            x0: 0.0,
            x1: 0.0,
            y0: self.range.0,
            y1: self.range.1,
        }
    }
}

pub struct Reach1dEnv {
    config: Reach1dConfig,
    layer: GridSpec,
    position: f64,
    target: f64,
    step: usize,
    done: bool,
    started: bool,
}

impl Reach1dEnv {
    pub fn new(config: Reach1dConfig) -> Result<Self> {
        config.validate()?;
        let layer = config.layer();
        Ok(Reach1dEnv {
            config,
            layer,
            position: 0.0,
            target: 0.0,
            step: 0,
            done: true,
            started: false,
        })
    }

    pub fn distance_to_target(&self) -> f64 {
        (self.position - self.target).abs()
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = self.layer.activations(0.0, self.position);
        obs.extend(self.layer.activations(0.0, self.target));
        obs
    }

    fn info(&self, outcome: Option<Outcome>) -> StepInfo {
        StepInfo {
            position: Some(self.position),
            target: Some(self.target),
            outcome,
            ..StepInfo::default()
        }
    }
}

impl Environment for Reach1dEnv {
    fn observation_size(&self) -> usize {
        2 * self.config.cells
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec {
            discrete: 0,
            motors: 1,
            motor_action: None,
            motor_limit: 0.5,
        }
    }

    fn t_max(&self) -> usize {
        self.config.t_max
    }

    fn reset(&mut self, seed: u64) -> Result<EnvOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: f64 = rng.random();
        self.target = self.config.target_range.0
            + (self.config.target_range.1 - self.config.target_range.0) * u;
        let u: f64 = rng.random();
        self.position = self.config.start_range.0
            + (self.config.start_range.1 - self.config.start_range.0) * u;
        // Re-roll starts that already sit on the target (bounded, in case
        // the configured ranges leave no room).
        for _ in 0..16 {
            if (self.position - self.target).abs() > self.config.goal_radius {
                break;
            }
            let u: f64 = rng.random();
            self.position = self.config.start_range.0
                + (self.config.start_range.1 - self.config.start_range.0) * u;
        }
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
        let motor = match action {
            HybridAction::Continuous(m) if m.len() == 1 => m[0],
            HybridAction::Continuous(m) => {
                return Err(Error::Shape(format!(
                    "reach1d expects a single motor component, got {}",
                    m.len()
                )))
            }
            HybridAction::Discrete(_) => {
                return Err(Error::Shape("reach1d takes continuous actions only".into()))
            }
        };
        let limit = self.action_spec().motor_limit;
        let (lo, hi) = self.config.range;
        self.position = (self.position + self.config.motion_scale * motor.clamp(-limit, limit))
            .clamp(lo, hi);
        self.step += 1;

        if self.distance_to_target() <= self.config.goal_radius {
            self.done = true;
            return Ok(EnvOutcome {
                observation: self.observe(),
                reward: self.config.r_goal,
                terminated: true,
                truncated: false,
                info: self.info(Some(Outcome::Goal)),
            });
        }
        if self.step >= self.config.t_max {
            // The horizon is part of the task: running out of time pays 0,
            // with no bootstrapping past it. Leaving this as a bootstrapped
            // truncation lets the value estimate inflate, which turns the
            // TD error persistently negative and drives the actor into an
            // actuator wall via the clamped-noise asymmetry.
            self.done = true;
            return Ok(EnvOutcome {
                observation: self.observe(),
                reward: 0.0,
                terminated: true,
                truncated: false,
                info: self.info(Some(Outcome::Timeout)),
            });
        }
        Ok(EnvOutcome {
            observation: self.observe(),
            reward: 0.0,
            terminated: false,
            truncated: false,
            info: self.info(None),
        })
    }
}
