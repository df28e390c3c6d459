//! TD building blocks: bootstrap targets, TD errors, the perturbation
//! reinforcement rule for actor outputs, and epsilon-greedy selection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::activation::ActivationSpec;

/// Q-learning target: `reward` for terminal transitions, otherwise
/// `reward + discount * next_q_max`.
pub fn q_target(reward: f64, discount: f64, next_q_max: f64, terminal: bool) -> f64 {
    debug_assert!((0.0..1.0).contains(&discount));
    if terminal {
        reward
    } else {
        reward + discount * next_q_max
    }
}

/// TD(0) error: `(reward + discount * v_next * [not terminal]) - v_current`.
pub fn td_error(reward: f64, discount: f64, v_next: f64, v_current: f64, terminal: bool) -> f64 {
    debug_assert!((0.0..1.0).contains(&discount));
    let bootstrap = if terminal { 0.0 } else { discount * v_next };
    reward + bootstrap - v_current
}

/// Actor training signal: pull the output toward the perturbation that was
/// actually executed, proportionally to the TD error. Positive error
/// reinforces the noise direction, negative error repels it. Targets are
/// clamped into the attainable activation range.
pub fn actor_training_signal(
    actor_output: &[f64],
    applied_noise: &[f64],
    td_err: f64,
    actor_gain: f64,
    activation: ActivationSpec,
) -> (Vec<f64>, Vec<bool>) {
    debug_assert_eq!(actor_output.len(), applied_noise.len());
    let target = actor_output
        .iter()
        .zip(applied_noise.iter())
        .map(|(&a, &n)| activation.clamp_target(a + actor_gain * td_err * n))
        .collect();
    let mask = vec![true; actor_output.len()];
    (target, mask)
}

/// Epsilon-greedy selection. With probability `1 - epsilon` returns the
/// argmax (lowest index wins ties), otherwise a uniformly random index.
/// Greedy selection with `epsilon == 0` draws nothing from the generator.
pub fn select_discrete(q_values: &[f64], epsilon: f64, rng: &mut ChaCha8Rng) -> usize {
    debug_assert!(!q_values.is_empty());
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if epsilon > 0.0 {
        let u: f64 = rng.random();
        if u < epsilon {
            return rng.random_range(0..q_values.len());
        }
    }
    argmax(q_values)
}

/// Index of the maximum, lowest index on ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
