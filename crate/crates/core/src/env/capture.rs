//! Invisible-moving-object capture task.
//!
//! An object enters from the left edge with a random position, speed, and
//! heading toward the agent's side, occasionally changing direction while it
//! passes through a randomly placed invisibility band. The agent slides
//! along a vertical line of motion on the right and must choose per step
//! between `capture` (ends the episode, paying off only if the object is
//! within the capture radius) and `move` (a continuous motor command shifts
//! it along its line). Observations are the object and agent receptive-field
//! layers; the object layer goes dark whenever the object is inside the
//! invisibility region.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{ActionSpec, HybridAction};

use super::sensors::SensorConfig;
use super::{EnvOutcome, Environment, Outcome, StepInfo};

/// Axis-aligned rectangle; containment includes the boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

/// Full simulator ground truth for the capture task.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    /// The agent's fixed line of motion.
    pub agent_x: f64,
    /// Lateral agent position along its line of motion.
    pub agent_y: f64,
    pub object_pos: (f64, f64),
    pub object_vel: (f64, f64),
    /// False exactly when the object sits inside the invisibility region.
    pub visible: bool,
    pub invisibility_region: Rect,
    pub step: usize,
}

/// Which sensor preset renders observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorPreset {
    /// 8x8 object + 16 agent cells (80 signals).
    Desk,
    /// 41x16 object + 11x16 agent cells (832 signals).
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaptureConfig {
    /// World rectangle; the object travels left to right across it.
    pub field: Rect,
    /// x coordinate of the agent's line of motion.
    pub agent_x: f64,
    /// Interval of agent positions along the line (range of motion).
    pub agent_y_range: (f64, f64),
    /// Object start y interval on the left edge.
    pub start_y: (f64, f64),
    /// Object speed interval, world units per step.
    pub speed: (f64, f64),
    /// Heading cone half-angle around +x, degrees.
    pub cone_deg: f64,
    /// Invisibility band: left edge drawn from this interval...
    pub invis_x0: (f64, f64),
    /// ...with a width drawn from this interval. The band spans full height.
    pub invis_width: (f64, f64),
    /// Per-step probability of redrawing the heading while invisible.
    pub dir_change_prob: f64,
    /// Capture succeeds when the object is within this distance (boundary
    /// counts as inside).
    pub capture_radius: f64,
    /// World units of agent motion per step per unit of motor command.
    pub motion_scale: f64,
    pub t_max: usize,
    pub r_capture: f64,
    pub r_fail: f64,
    /// When true a missed capture ends the episode. Off by default: a miss
    /// costs r_fail and the object keeps moving, which keeps the cost of a
    /// capture attempt a clean 0.1 against an otherwise identical
    /// continuation.
    pub fail_ends_episode: bool,
    /// Extra world steps a missed grab consumes while the agent recovers.
    /// Makes blind capture spam pay a time price, not just r_fail.
    pub fail_cooldown: usize,
    pub sensors: SensorPreset,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            field: Rect {
                x0: 0.0,
                x1: 4.0,
                y0: 0.0,
                y1: 3.0,
            },
            agent_x: 3.5,
            agent_y_range: (0.0, 3.0),
            start_y: (0.0, 3.0),
            speed: (0.10, 0.16),
            cone_deg: 25.0,
            invis_x0: (0.9, 1.7),
            invis_width: (0.8, 1.4),
            dir_change_prob: 0.05,
            capture_radius: 0.25,
            motion_scale: 0.25,
            t_max: 60,
            r_capture: 0.9,
            r_fail: -0.1,
            fail_ends_episode: false,
            fail_cooldown: 2,
            sensors: SensorPreset::Desk,
        }
    }
}

impl CaptureConfig {
    pub fn sensor_config(&self) -> SensorConfig {
        let fx = (self.field.x0, self.field.x1);
        let fy = (self.field.y0, self.field.y1);
        match self.sensors {
            SensorPreset::Desk => SensorConfig::desk(fx, fy, self.agent_x),
            SensorPreset::Full => SensorConfig::full_scale(fx, fy, self.agent_x),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let intervals = [
            ("agent_y_range", self.agent_y_range),
            ("start_y", self.start_y),
            ("speed", self.speed),
            ("invis_x0", self.invis_x0),
            ("invis_width", self.invis_width),
        ];
        for (name, (lo, hi)) in intervals {
            if !(lo.is_finite() && hi.is_finite()) || hi < lo {
                return Err(Error::Config(format!(
                    "capture: {name} interval [{lo}, {hi}] is empty or non-finite"
                )));
            }
        }
        if self.field.x1 <= self.field.x0 || self.field.y1 <= self.field.y0 {
            return Err(Error::Config("capture: degenerate field rectangle".into()));
        }
        if self.speed.0 <= 0.0 {
            return Err(Error::Config("capture: speed must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.dir_change_prob) {
            return Err(Error::Config(
                "capture: dir_change_prob must be a probability".into(),
            ));
        }
        if self.capture_radius <= 0.0 || self.motion_scale <= 0.0 || self.t_max == 0 {
            return Err(Error::Config(
                "capture: capture_radius, motion_scale, and t_max must be positive".into(),
            ));
        }
        if !(0.0..90.0).contains(&self.cone_deg) {
            return Err(Error::Config(
                "capture: cone_deg must be in [0, 90) so the object always advances".into(),
            ));
        }
        self.sensor_config().validate()
    }
}

pub struct CaptureEnv {
    config: CaptureConfig,
    sensors: SensorConfig,
    state: WorldState,
    rng: ChaCha8Rng,
    done: bool,
    started: bool,
    capture_attempts: usize,
}

impl CaptureEnv {
    pub fn new(config: CaptureConfig) -> Result<Self> {
        config.validate()?;
        let sensors = config.sensor_config();
        let state = WorldState {
            agent_x: config.agent_x,
            agent_y: midpoint(config.agent_y_range),
            object_pos: (config.field.x0, 0.0),
            object_vel: (0.0, 0.0),
            visible: true,
            invisibility_region: Rect {
                x0: 0.0,
                x1: 0.0,
                y0: 0.0,
                y1: 0.0,
            },
            step: 0,
        };
        Ok(CaptureEnv {
            config,
            sensors,
            state,
            rng: ChaCha8Rng::seed_from_u64(0),
            done: true,
            started: false,
            capture_attempts: 0,
        })
    }

    pub fn world_state(&self) -> &WorldState {
        &self.state
    }

    pub fn config(&self) -> &CaptureConfig {
        &self.config
    }

    fn draw_heading(&mut self, speed: f64) -> (f64, f64) {
        let cone = self.config.cone_deg.to_radians();
        let angle = uniform(&mut self.rng, -cone, cone);
        (speed * angle.cos(), speed * angle.sin())
    }

    fn observe(&self) -> Vec<f64> {
        render_sensors(&self.state, &self.sensors)
    }

    fn info(&self, outcome: Option<Outcome>) -> StepInfo {
        StepInfo {
            agent_y: Some(self.state.agent_y),
            object_x: Some(self.state.object_pos.0),
            object_y: Some(self.state.object_pos.1),
            object_vx: Some(self.state.object_vel.0),
            object_vy: Some(self.state.object_vel.1),
            visible: Some(self.state.visible),
            outcome,
            ..StepInfo::default()
        }
    }

    fn object_speed(&self) -> f64 {
        let (vx, vy) = self.state.object_vel;
        (vx * vx + vy * vy).sqrt()
    }

    fn update_visibility(&mut self) {
        let (x, y) = self.state.object_pos;
        self.state.visible = !self.state.invisibility_region.contains(x, y);
    }

    fn advance_object(&mut self) {
        let field = self.config.field;
        let (mut x, mut y) = self.state.object_pos;
        let (vx, mut vy) = self.state.object_vel;
        x += vx;
        y += vy;
        // Reflect off the top and bottom field walls.
        if y < field.y0 {
            y = 2.0 * field.y0 - y;
            vy = -vy;
        } else if y > field.y1 {
            y = 2.0 * field.y1 - y;
            vy = -vy;
        }
        self.state.object_pos = (x, y);
        self.state.object_vel = (vx, vy);
        self.update_visibility();
        if !self.state.visible && self.config.dir_change_prob > 0.0 {
            let u: f64 = self.rng.random();
            if u < self.config.dir_change_prob {
                let speed = self.object_speed();
                self.state.object_vel = self.draw_heading(speed);
            }
        }
    }
}

impl CaptureEnv {
    /// Advance the step counter and report whether the episode just ended.
    /// Timeouts (and the object leaving the field) terminate rather than
    /// truncate; anchoring the value of never capturing at 0 keeps it
    /// strictly above the cost of a botched capture.
    fn check_end(&mut self) -> Option<Outcome> {
        self.state.step += 1;
        let out_of_field = self.state.object_pos.0 > self.config.field.x1;
        let timed_out = self.state.step >= self.config.t_max;
        if out_of_field || timed_out {
            self.done = true;
            Some(if self.capture_attempts > 0 {
                Outcome::Fail
            } else {
                Outcome::Timeout
            })
        } else {
            None
        }
    }

    fn outcome(&self, reward: f64, end: Option<Outcome>) -> EnvOutcome {
        EnvOutcome {
            observation: self.observe(),
            reward,
            terminated: end.is_some(),
            truncated: false,
            info: self.info(end),
        }
    }
}

/// Render the sensor layers for a world state: the bilinear object layer
/// (all zeros while the object is invisible) followed by the always-on
/// agent layer.
pub fn render_sensors(state: &WorldState, sensors: &SensorConfig) -> Vec<f64> {
    let mut obs = if state.visible {
        sensors
            .object
            .activations(state.object_pos.0, state.object_pos.1)
    } else {
        vec![0.0; sensors.object.cells()]
    };
    obs.extend(sensors.agent.activations(state.agent_x, state.agent_y));
    obs
}

fn midpoint((lo, hi): (f64, f64)) -> f64 {
    0.5 * (lo + hi)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    lo + (hi - lo) * u
}

impl Environment for CaptureEnv {
    fn observation_size(&self) -> usize {
        self.sensors.total_signals()
    }

    fn action_spec(&self) -> ActionSpec {
        ActionSpec {
            discrete: 2,
            motors: 2,
            motor_action: Some(1),
            motor_limit: 0.5,
        }
    }

    fn t_max(&self) -> usize {
        self.config.t_max
    }

    fn reset(&mut self, seed: u64) -> Result<EnvOutcome> {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        let c = &self.config;
        // Fixed draw order: start y, speed, heading angle, band left edge,
        // band width.
        let start_y = uniform(&mut self.rng, c.start_y.0, c.start_y.1);
        let speed = uniform(&mut self.rng, c.speed.0, c.speed.1);
        let vel = self.draw_heading(speed);
        let c = &self.config;
        let invis_x0 = uniform(&mut self.rng, c.invis_x0.0, c.invis_x0.1);
        let invis_width = uniform(&mut self.rng, c.invis_width.0, c.invis_width.1);
        self.state = WorldState {
            agent_x: c.agent_x,
            agent_y: midpoint(c.agent_y_range),
            object_pos: (c.field.x0, start_y),
            object_vel: vel,
            visible: true,
            invisibility_region: Rect {
                x0: invis_x0,
                x1: invis_x0 + invis_width,
                y0: c.field.y0,
                y1: c.field.y1,
            },
            step: 0,
        };
        self.update_visibility();
        self.done = false;
        self.started = true;
        self.capture_attempts = 0;
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
        match action {
            HybridAction::Discrete(0) => {
                let (ox, oy) = self.state.object_pos;
                let dx = ox - self.state.agent_x;
                let dy = oy - self.state.agent_y;
                let dist = (dx * dx + dy * dy).sqrt();
                self.capture_attempts += 1;
                if dist <= self.config.capture_radius {
                    self.done = true;
                    self.state.step += 1;
                    return Ok(EnvOutcome {
                        observation: self.observe(),
                        reward: self.config.r_capture,
                        terminated: true,
                        truncated: false,
                        info: self.info(Some(Outcome::Capture)),
                    });
                }
                if self.config.fail_ends_episode {
                    self.done = true;
                    self.state.step += 1;
                    return Ok(EnvOutcome {
                        observation: self.observe(),
                        reward: self.config.r_fail,
                        terminated: true,
                        truncated: false,
                        info: self.info(Some(Outcome::Fail)),
                    });
                }
                // Missed grab: pay the penalty while the grab and recovery
                // take 1 + fail_cooldown steps of world time.
                let mut end = None;
                for _ in 0..=self.config.fail_cooldown {
                    self.advance_object();
                    end = self.check_end();
                    if end.is_some() {
                        break;
                    }
                }
                Ok(self.outcome(self.config.r_fail, end))
            }
            HybridAction::Discrete(i) => Err(Error::Shape(format!(
                "capture task has discrete actions {{0: capture}}; got index {i}"
            ))),
            HybridAction::Continuous(motor) => {
                if motor.len() != 2 {
                    return Err(Error::Shape(format!(
                        "capture task expects a 2-component motor command, got {}",
                        motor.len()
                    )));
                }
                let limit = self.action_spec().motor_limit;
                // The two actor outputs drive one degree of freedom; their
                // mean sets the displacement along the line of motion.
                let m0 = motor[0].clamp(-limit, limit);
                let m1 = motor[1].clamp(-limit, limit);
                let dy = self.config.motion_scale * 0.5 * (m0 + m1);
                let (lo, hi) = self.config.agent_y_range;
                self.state.agent_y = (self.state.agent_y + dy).clamp(lo, hi);
                self.advance_object();
                let end = self.check_end();
                Ok(self.outcome(0.0, end))
            }
        }
    }
}
