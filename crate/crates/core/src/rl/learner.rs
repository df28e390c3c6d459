//! The online learner: action selection from raw network outputs and the
//! composition of TD targets into masked per-step training signals.
//!
//! Network output layout by learner kind:
//!
//! - Q-learning:   `[Q_0 .. Q_{n-1}]`
//! - actor-critic: `[V, actor_0 .. actor_{m-1}]`
//! - Actor-Q:      `[Q_0 .. Q_{n-1}, actor_0 .. actor_{m-1}]`
//!
//! Value outputs live in network units (`q_net = q_scale * q_reward`); TD
//! arithmetic happens in reward units and is scaled back on the way into the
//! target vector. Actor outputs are trained only on steps where a motor
//! command was actually executed — no command, no defined gradient.

use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::net::{EpisodeTrace, NetworkWeights, RnnState, StepTarget, TraceStep};
use crate::rng::gaussian;

use super::td::{actor_training_signal, argmax, q_target, select_discrete, td_error};
use super::{ActionSpec, HybridAction, LearnerConfig, LearnerKind, Transition};

/// What `decide` produced: the action handed to the environment plus the
/// exploration perturbation actually baked into it.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    pub action: HybridAction,
    pub applied_noise: Vec<f64>,
}

/// Network values needed to turn a [`Transition`] into a training signal.
#[derive(Debug, Clone, Copy)]
pub struct StepValues<'a> {
    /// Hidden state before the step; required for recurrent networks.
    pub hidden_before: Option<&'a RnnState>,
    /// Output activations that produced the action.
    pub outputs: &'a [f64],
    /// Output activations at the successor observation under the current
    /// weights; `None` exactly when the transition is terminal.
    pub next_outputs: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    spec: ActionSpec,
    activation: ActivationSpec,
}

impl Learner {
    /// `activation` is the output units' spec, used to keep training targets
    /// inside the attainable range.
    pub fn new(config: LearnerConfig, spec: ActionSpec, activation: ActivationSpec) -> Result<Self> {
        config.validate()?;
        activation.validate()?;
        match config.kind {
            LearnerKind::QLearning => {
                if spec.discrete == 0 || spec.motors != 0 {
                    return Err(Error::Config(
                        "q_learning requires a purely discrete action space".into(),
                    ));
                }
            }
            LearnerKind::ActorCritic => {
                if spec.discrete != 0 || spec.motors == 0 {
                    return Err(Error::Config(
                        "actor_critic requires a purely continuous action space".into(),
                    ));
                }
            }
            LearnerKind::ActorQ => {
                if spec.discrete == 0 {
                    return Err(Error::Config(
                        "actor_q requires at least one discrete action".into(),
                    ));
                }
                if spec.motors > 0 && spec.motor_action.map_or(true, |a| a >= spec.discrete) {
                    return Err(Error::Config(
                        "actor_q with motors needs a valid motor_action index".into(),
                    ));
                }
            }
        }
        if spec.motors > 0 && !(spec.motor_limit.is_finite() && spec.motor_limit > 0.0) {
            return Err(Error::Config("motor_limit must be positive".into()));
        }
        Ok(Learner {
            config,
            spec,
            activation,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn action_spec(&self) -> ActionSpec {
        self.spec
    }

    /// Number of value outputs at the head of the output vector.
    pub fn value_outputs(&self) -> usize {
        match self.config.kind {
            LearnerKind::QLearning | LearnerKind::ActorQ => self.spec.discrete,
            LearnerKind::ActorCritic => 1,
        }
    }

    pub fn motor_outputs(&self) -> usize {
        match self.config.kind {
            LearnerKind::QLearning => 0,
            LearnerKind::ActorCritic | LearnerKind::ActorQ => self.spec.motors,
        }
    }

    /// Total network output size this learner expects.
    pub fn output_size(&self) -> usize {
        self.value_outputs() + self.motor_outputs()
    }

    /// Exploring action selection for training.
    pub fn decide(
        &self,
        outputs: &[f64],
        episode: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<StepDecision> {
        let epsilon = self.config.epsilon.value(episode);
        let sigma = self.config.noise_sigma.value(episode);
        self.decide_inner(outputs, epsilon, sigma, Some(rng))
    }

    /// Greedy action selection for evaluation: no exploration and no
    /// generator draws, so evaluation cannot shift training streams.
    pub fn decide_greedy(&self, outputs: &[f64]) -> Result<StepDecision> {
        self.decide_inner(outputs, 0.0, 0.0, None)
    }

    fn decide_inner(
        &self,
        outputs: &[f64],
        epsilon: f64,
        sigma: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<StepDecision> {
        if outputs.len() < self.output_size() {
            return Err(Error::Shape(format!(
                "output vector has {} entries, learner expects {}",
                outputs.len(),
                self.output_size()
            )));
        }
        let n_value = self.value_outputs();

        match self.config.kind {
            LearnerKind::QLearning => {
                let idx = match rng.as_deref_mut() {
                    Some(r) => select_discrete(&outputs[..n_value], epsilon, r),
                    None => argmax(&outputs[..n_value]),
                };
                Ok(StepDecision {
                    action: HybridAction::Discrete(idx),
                    applied_noise: Vec::new(),
                })
            }
            LearnerKind::ActorCritic => {
                let (command, noise) = self.motor_command(outputs, sigma, &mut rng);
                Ok(StepDecision {
                    action: HybridAction::Continuous(command),
                    applied_noise: noise,
                })
            }
            LearnerKind::ActorQ => {
                let idx = match rng.as_deref_mut() {
                    Some(r) => select_discrete(&outputs[..n_value], epsilon, r),
                    None => argmax(&outputs[..n_value]),
                };
                if Some(idx) == self.spec.motor_action && self.spec.motors > 0 {
                    let (command, noise) = self.motor_command(outputs, sigma, &mut rng);
                    Ok(StepDecision {
                        action: HybridAction::Continuous(command),
                        applied_noise: noise,
                    })
                } else {
                    Ok(StepDecision {
                        action: HybridAction::Discrete(idx),
                        applied_noise: vec![0.0; self.spec.motors],
                    })
                }
            }
        }
    }

    /// Motor command = actor outputs + Gaussian exploration, clamped to the
    /// actuator limits. The recorded noise is `executed - actor_output`, so
    /// it stays truthful after clamping.
    fn motor_command(
        &self,
        outputs: &[f64],
        sigma: f64,
        rng: &mut Option<&mut ChaCha8Rng>,
    ) -> (Vec<f64>, Vec<f64>) {
        let n_value = self.value_outputs();
        let actor = &outputs[n_value..n_value + self.spec.motors];
        let limit = self.spec.motor_limit;
        let mut command = Vec::with_capacity(actor.len());
        let mut noise = Vec::with_capacity(actor.len());
        for &a in actor {
            let perturbed = match rng.as_deref_mut() {
                Some(r) if sigma > 0.0 => a + sigma * gaussian(r),
                _ => a,
            };
            let clamped = perturbed.clamp(-limit, limit);
            command.push(clamped);
            noise.push(clamped - a);
        }
        (command, noise)
    }

    /// Compose the masked training signal for one transition and either
    /// append it to the episode trace (recurrent networks) or apply one
    /// backprop step immediately (feedforward networks). Returns the TD
    /// error of the trained value output, in reward units.
    pub fn learn_step(
        &self,
        net: &mut NetworkWeights,
        trace: Option<&mut EpisodeTrace>,
        transition: &Transition,
        values: StepValues<'_>,
    ) -> Result<f64> {
        if values.outputs.len() != self.output_size() || net.output_size() != self.output_size()
        {
            return Err(Error::Shape(format!(
                "network output size {} does not match learner layout {}",
                net.output_size(),
                self.output_size()
            )));
        }
        if !transition.terminal && values.next_outputs.is_none() {
            return Err(Error::Config(
                "non-terminal transition needs successor outputs to bootstrap".into(),
            ));
        }
        let (target, mask, delta) = self.step_target(transition, &values)?;

        if net.is_recurrent() {
            let trace = trace.ok_or_else(|| {
                Error::Integrity("recurrent network requires an episode trace".into())
            })?;
            let hidden = values.hidden_before.ok_or_else(|| {
                Error::Integrity("recurrent learn_step needs the pre-step hidden state".into())
            })?;
            trace.push(TraceStep {
                input: transition.observation.clone(),
                hidden_before: hidden.hidden().to_vec(),
                outputs: values.outputs.to_vec(),
                target: Some(StepTarget {
                    values: target,
                    mask,
                }),
            });
        } else {
            net.backprop_layered(&transition.observation, &target, &mask, self.config.lr_net)?;
        }
        Ok(delta)
    }

    /// Episode-end update for recurrent networks: one BPTT step over the
    /// accumulated trace. A no-op for feedforward networks, which already
    /// updated per step.
    pub fn finish_episode(&self, net: &mut NetworkWeights, trace: &EpisodeTrace) -> Result<()> {
        if !net.is_recurrent() {
            return Ok(());
        }
        net.bptt_train(trace, self.config.lr_net, self.config.bptt_window)?;
        Ok(())
    }

    /// The masked target vector for one transition, plus the TD error (in
    /// reward units) of the trained value output.
    fn step_target(
        &self,
        transition: &Transition,
        values: &StepValues<'_>,
    ) -> Result<(Vec<f64>, Vec<bool>, f64)> {
        let cfg = &self.config;
        let n_value = self.value_outputs();
        let outputs = values.outputs;

        // Masked-out entries keep the current output value; they never
        // influence the update.
        let mut target = outputs.to_vec();
        let mut mask = vec![false; outputs.len()];

        let delta = match cfg.kind {
            LearnerKind::QLearning | LearnerKind::ActorQ => {
                let acted = match &transition.action {
                    HybridAction::Discrete(i) => *i,
                    HybridAction::Continuous(_) => self.spec.motor_action.ok_or_else(|| {
                        Error::Config("continuous action on a discrete-only learner".into())
                    })?,
                };
                if acted >= n_value {
                    return Err(Error::Shape(format!(
                        "action index {acted} out of range for {n_value} Q outputs"
                    )));
                }
                let next_q_max = values
                    .next_outputs
                    .map(|next| next[..n_value][argmax(&next[..n_value])] / cfg.q_scale)
                    .unwrap_or(0.0);
                let t_real = q_target(
                    transition.reward,
                    cfg.discount,
                    next_q_max,
                    transition.terminal,
                );
                let delta = t_real - outputs[acted] / cfg.q_scale;
                target[acted] = self.activation.clamp_target(t_real * cfg.q_scale);
                mask[acted] = true;

                if cfg.kind == LearnerKind::ActorQ
                    && self.spec.motors > 0
                    && matches!(transition.action, HybridAction::Continuous(_))
                {
                    self.write_actor_target(outputs, transition, delta, &mut target, &mut mask);
                }
                delta
            }
            LearnerKind::ActorCritic => {
                let v = outputs[0] / cfg.q_scale;
                let v_next = values
                    .next_outputs
                    .map(|next| next[0] / cfg.q_scale)
                    .unwrap_or(0.0);
                let delta = td_error(
                    transition.reward,
                    cfg.discount,
                    v_next,
                    v,
                    transition.terminal,
                );
                target[0] = self.activation.clamp_target((v + delta) * cfg.q_scale);
                mask[0] = true;
                self.write_actor_target(outputs, transition, delta, &mut target, &mut mask);
                delta
            }
        };
        Ok((target, mask, delta))
    }

    fn write_actor_target(
        &self,
        outputs: &[f64],
        transition: &Transition,
        delta: f64,
        target: &mut [f64],
        mask: &mut [bool],
    ) {
        let n_value = self.value_outputs();
        let actor = &outputs[n_value..n_value + self.spec.motors];
        let (actor_target, actor_mask) = actor_training_signal(
            actor,
            &transition.applied_noise,
            delta,
            self.config.actor_gain,
            self.activation,
        );
        for (k, (t, m)) in actor_target.into_iter().zip(actor_mask).enumerate() {
            target[n_value + k] = t;
            mask[n_value + k] = m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::Schedule;
    use rand::SeedableRng;

    fn capture_spec() -> ActionSpec {
        ActionSpec {
            discrete: 2,
            motors: 2,
            motor_action: Some(1),
            motor_limit: 0.5,
        }
    }

    fn actor_q_learner(epsilon: f64, sigma: f64) -> Learner {
        let config = LearnerConfig {
            kind: LearnerKind::ActorQ,
            epsilon: Schedule::constant(epsilon),
            noise_sigma: Schedule::constant(sigma),
            ..LearnerConfig::default()
        };
        Learner::new(config, capture_spec(), ActivationSpec::symmetric_sigmoid()).unwrap()
    }

    #[test]
    fn greedy_capture_branch_has_zero_noise() {
        let learner = actor_q_learner(0.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let outputs = [0.3, 0.1, 0.2, -0.2]; // Q_capture > Q_move
        let d = learner.decide(&outputs, 0, &mut rng).unwrap();
        assert_eq!(d.action, HybridAction::Discrete(0));
        assert_eq!(d.applied_noise, vec![0.0, 0.0]);
    }

    #[test]
    fn noiseless_move_returns_actor_outputs_exactly() {
        let learner = actor_q_learner(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let outputs = [0.1, 0.3, 0.25, -0.4]; // Q_move wins
        let d = learner.decide(&outputs, 0, &mut rng).unwrap();
        assert_eq!(d.action, HybridAction::Continuous(vec![0.25, -0.4]));
        assert_eq!(d.applied_noise, vec![0.0, 0.0]);
    }

    #[test]
    fn noise_std_matches_sigma_away_from_clamps() {
        // sigma = 0.05, actor outputs at 0: clamping at ±0.5 never binds, so
        // the executed noise std must track sigma within 5%.
        let learner = actor_q_learner(0.0, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let outputs = [0.0, 0.3, 0.0, 0.0];
        let n = 10_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let d = learner.decide(&outputs, 0, &mut rng).unwrap();
            for v in &d.applied_noise {
                sum_sq += v * v;
            }
        }
        let std = (sum_sq / (2 * n) as f64).sqrt();
        assert!(
            (std - 0.05).abs() / 0.05 < 0.05,
            "noise std {std} deviates more than 5% from 0.05"
        );
    }

    #[test]
    fn noise_bookkeeping_survives_clamping() {
        // Actor output near the limit with huge noise: executed - actor must
        // still equal the recorded noise.
        let learner = actor_q_learner(0.0, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let outputs = [0.0, 0.4, 0.49, -0.49];
        for _ in 0..200 {
            let d = learner.decide(&outputs, 0, &mut rng).unwrap();
            if let HybridAction::Continuous(cmd) = &d.action {
                assert!(cmd.iter().all(|c| c.abs() <= 0.5));
                for (k, c) in cmd.iter().enumerate() {
                    let actor = outputs[2 + k];
                    assert!((c - (actor + d.applied_noise[k])).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn short_output_vector_is_a_shape_error() {
        let learner = actor_q_learner(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(matches!(
            learner.decide(&[0.1, 0.2, 0.3], 0, &mut rng),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn terminal_capture_masks_everything_but_the_q_output() {
        let learner = actor_q_learner(0.0, 0.0);
        let outputs = vec![0.05, 0.02, 0.1, -0.1];
        let transition = Transition {
            observation: vec![0.0; 3],
            action: HybridAction::Discrete(0),
            applied_noise: vec![0.0, 0.0],
            reward: 0.9,
            next_observation: vec![0.0; 3],
            terminal: true,
        };
        let (target, mask, _) = learner
            .step_target(
                &transition,
                &StepValues {
                    hidden_before: None,
                    outputs: &outputs,
                    next_outputs: None,
                },
            )
            .unwrap();
        assert_eq!(mask, vec![true, false, false, false]);
        // 0.9 reward scaled by q_scale 0.4
        assert!((target[0] - 0.36).abs() < 1e-15);
        assert_eq!(&target[1..], &outputs[1..]);
    }

    #[test]
    fn consistent_prediction_is_a_no_op_update() {
        // Feedforward net whose Q outputs already equal the bootstrapped
        // target: the masked error is zero and weights stay put.
        let config = LearnerConfig {
            kind: LearnerKind::QLearning,
            epsilon: Schedule::constant(0.0),
            noise_sigma: Schedule::constant(0.0),
            ..LearnerConfig::default()
        };
        let spec = ActionSpec {
            discrete: 2,
            motors: 0,
            motor_action: None,
            motor_limit: 0.0,
        };
        let learner = Learner::new(config, spec, ActivationSpec::linear()).unwrap();
        let mut net = NetworkWeights::zeros(&[2, 2], false, ActivationSpec::linear()).unwrap();
        // Zero net: all Q are 0; reward 0 non-terminal with next max 0 makes
        // the target 0 as well.
        let before = net.clone();
        let outputs = net.forward_layered(&[1.0, 0.0]).unwrap();
        let next = net.forward_layered(&[0.0, 1.0]).unwrap();
        let delta = learner
            .learn_step(
                &mut net,
                None,
                &Transition {
                    observation: vec![1.0, 0.0],
                    action: HybridAction::Discrete(0),
                    applied_noise: Vec::new(),
                    reward: 0.0,
                    next_observation: vec![0.0, 1.0],
                    terminal: false,
                },
                StepValues {
                    hidden_before: None,
                    outputs: &outputs,
                    next_outputs: Some(&next),
                },
            )
            .unwrap();
        assert_eq!(delta, 0.0);
        assert_eq!(net, before);
    }

    #[test]
    fn recurrent_learner_without_trace_is_an_integrity_error() {
        let learner = actor_q_learner(0.0, 0.0);
        let mut net = NetworkWeights::zeros(
            &[3, 4, 4],
            true,
            ActivationSpec::symmetric_sigmoid(),
        )
        .unwrap();
        let outputs = vec![0.0; 4];
        let err = learner
            .learn_step(
                &mut net,
                None,
                &Transition {
                    observation: vec![0.0; 3],
                    action: HybridAction::Discrete(0),
                    applied_noise: vec![0.0, 0.0],
                    reward: 0.0,
                    next_observation: vec![0.0; 3],
                    terminal: true,
                },
                StepValues {
                    hidden_before: None,
                    outputs: &outputs,
                    next_outputs: None,
                },
            )
            .unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }
}
