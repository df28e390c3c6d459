//! Five-state chain MDP with a known transition table, used as an oracle
//! task: value iteration has a closed form, so learned Q functions can be
//! checked exactly.
//!
//! States 0..4, actions {0: left, 1: right}. Right moves toward state 4 and,
//! taken there, terminates with the goal reward. Left moves back (state 0 is
//! absorbing-left). All other rewards are zero; observations are one-hot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{ActionSpec, HybridAction};

use super::{EnvOutcome, Environment, Outcome, StepInfo};

pub const CHAIN_STATES: usize = 5;
pub const CHAIN_ACTIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    pub r_goal: f64,
    pub t_max: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            r_goal: 0.9,
            t_max: 50,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.r_goal.is_finite() {
            return Err(Error::Config("chain_mdp: non-finite goal reward".into()));
        }
        if self.t_max == 0 {
            return Err(Error::Config("chain_mdp: t_max must be positive".into()));
        }
        Ok(())
    }
}

pub struct ChainEnv {
    config: ChainConfig,
    state: usize,
    step: usize,
    done: bool,
    started: bool,
}

impl ChainEnv {
    pub fn new(config: ChainConfig) -> Result<Self> {
        config.validate()?;
        Ok(ChainEnv {
            config,
            state: 0,
            step: 0,
            done: true,
            started: false,
        })
    }

    pub fn state(&self) -> usize {
        self.state
    }

    /// Deterministic transition table: (next_state, reward, terminal).
    pub fn transition(config: &ChainConfig, state: usize, action: usize) -> (usize, f64, bool) {
        match action {
            1 if state == CHAIN_STATES - 1 => (state, config.r_goal, true),
            1 => (state + 1, 0.0, false),
            _ => (state.saturating_sub(1), 0.0, false),
        }
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = vec![0.0; CHAIN_STATES];
        obs[self.state] = 1.0;
        obs
    }

    fn info(&self, outcome: Option<Outcome>) -> StepInfo {
        StepInfo {
            state: Some(self.state),
            outcome,
            ..StepInfo::default()
        }
    }
}

impl Environment for ChainEnv {
    fn observation_size(&self) -> usize {
        CHAIN_STATES
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec {
            discrete: CHAIN_ACTIONS,
            motors: 0,
            motor_action: None,
            motor_limit: 0.0,
        }
    }

    fn t_max(&self) -> usize {
        self.config.t_max
    }

    fn reset(&mut self, _seed: u64) -> Result<EnvOutcome> {
        self.state = 0;
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
        let a = match action {
            HybridAction::Discrete(i) if *i < CHAIN_ACTIONS => *i,
            HybridAction::Discrete(i) => {
                return Err(Error::Shape(format!(
                    "chain_mdp has {CHAIN_ACTIONS} actions, got index {i}"
                )))
            }
            HybridAction::Continuous(_) => {
                return Err(Error::Shape("chain_mdp takes discrete actions only".into()))
            }
        };
        let (next, reward, terminal) = Self::transition(&self.config, self.state, a);
        self.state = next;
        self.step += 1;
        if terminal {
            self.done = true;
            return Ok(EnvOutcome {
                observation: self.observe(),
                reward,
                terminated: true,
                truncated: false,
                info: self.info(Some(Outcome::Goal)),
            });
        }
        if self.step >= self.config.t_max {
            self.done = true;
            return Ok(EnvOutcome {
                observation: self.observe(),
                reward,
                terminated: false,
                truncated: true,
                info: self.info(Some(Outcome::Timeout)),
            });
        }
        Ok(EnvOutcome {
            observation: self.observe(),
            reward,
            terminated: false,
            truncated: false,
            info: self.info(None),
        })
    }
}

/// Value iteration to convergence; the independent check for everything the
/// learners produce on this task. Returns Q[state][action].
pub fn chain_value_iteration(config: &ChainConfig, discount: f64) -> Vec<[f64; CHAIN_ACTIONS]> {
    let mut q = vec![[0.0f64; CHAIN_ACTIONS]; CHAIN_STATES];
    loop {
        let mut next = q.clone();
        let mut delta: f64 = 0.0;
        for s in 0..CHAIN_STATES {
            for a in 0..CHAIN_ACTIONS {
                let (s2, r, terminal) = ChainEnv::transition(config, s, a);
                let bootstrap = if terminal {
                    0.0
                } else {
                    discount * q[s2].iter().cloned().fold(f64::MIN, f64::max)
                };
                next[s][a] = r + bootstrap;
                delta = delta.max((next[s][a] - q[s][a]).abs());
            }
        }
        q = next;
        if delta < 1e-14 {
            return q;
        }
    }
}
