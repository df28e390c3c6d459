//! Recurrent stepping and backpropagation through time.
//!
//! Recurrence feeds the first hidden layer back into itself:
//!
//! `h_t = f(W0' x_t + R' h_{t-1} + b0)`
//!
//! with the remaining layers applied feedforward from `h_t`. A training
//! episode is captured in an [`EpisodeTrace`]; `bptt_train` replays it,
//! verifies the stored hidden states, and takes one gradient step on the
//! summed masked squared error with credit propagated across all steps.

use crate::error::{Error, Result};
use crate::linalg::add_scaled_vec;

use super::{check_lr, check_target, NetGrads, NetworkWeights};

/// Tolerance for trace replay: stored hidden states further than this from
/// the recomputed ones indicate a stale or foreign trace, not float noise.
pub const TRACE_TOLERANCE: f64 = 1e-9;

/// Hidden-layer activations carried across steps within an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct RnnState {
    hidden: Vec<f64>,
}

impl RnnState {
    pub fn zeros(hidden_size: usize) -> Self {
        RnnState {
            hidden: vec![0.0; hidden_size],
        }
    }

    pub fn new(hidden: Vec<f64>) -> Self {
        RnnState { hidden }
    }

    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    pub fn len(&self) -> usize {
        self.hidden.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hidden.is_empty()
    }
}

/// Per-step training target: desired values plus a mask saying which
/// outputs actually received a signal.
#[derive(Debug, Clone, PartialEq)]
pub struct StepTarget {
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

/// One recorded step: what went in, the hidden state before the step, what
/// came out, and (optionally) the training signal attached afterwards.
#[derive(Debug, Clone)]
pub struct TraceStep {
    pub input: Vec<f64>,
    pub hidden_before: Vec<f64>,
    pub outputs: Vec<f64>,
    pub target: Option<StepTarget>,
}

/// Ordered record of an episode, replayable against the network that
/// produced it.
#[derive(Debug, Clone, Default)]
pub struct EpisodeTrace {
    steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn new() -> Self {
        EpisodeTrace { steps: Vec::new() }
    }

    pub fn push(&mut self, step: TraceStep) {
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

impl NetworkWeights {
    /// One recurrent transition. Returns the new state and the output-layer
    /// activations computed from it.
    pub fn rnn_step(&self, state: &RnnState, input: &[f64]) -> Result<(RnnState, Vec<f64>)> {
        let acts = self.rnn_step_activations(state, input)?;
        let hidden = acts[1].clone();
        let output = acts.last().unwrap().clone();
        Ok((RnnState::new(hidden), output))
    }

    /// Full activation stack `[x, h_new, ..., output]` for one transition.
    fn rnn_step_activations(&self, state: &RnnState, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        let rec = self.recurrent().ok_or_else(|| {
            Error::Config("rnn_step requires a recurrent network; use forward_layered".into())
        })?;
        if input.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "input length {} does not match input layer size {}",
                input.len(),
                self.input_size()
            )));
        }
        if state.len() != self.hidden_size() {
            return Err(Error::Shape(format!(
                "hidden state length {} does not match hidden layer size {}",
                state.len(),
                self.hidden_size()
            )));
        }
        let mut z = self.bias(0).to_vec();
        self.weight(0).acc_forward(input, &mut z);
        rec.acc_forward(state.hidden(), &mut z);
        let activation = self.activation();
        let hidden: Vec<f64> = z.iter().map(|&v| activation.apply(v)).collect();

        let mut acts = Vec::with_capacity(self.layer_sizes().len());
        acts.push(input.to_vec());
        acts.push(hidden);
        for l in 1..self.num_layers() {
            let mut z = self.bias(l).to_vec();
            self.weight(l).acc_forward(acts.last().unwrap(), &mut z);
            acts.push(z.iter().map(|&v| activation.apply(v)).collect());
        }
        Ok(acts)
    }

    /// One gradient step of backpropagation through time over a whole
    /// episode. `truncation` of `Some(w)` cuts credit flow at chunk
    /// boundaries every `w` steps; `None` propagates through the full
    /// episode. Returns the pre-update summed loss.
    pub fn bptt_train(
        &mut self,
        trace: &EpisodeTrace,
        lr: f64,
        truncation: Option<usize>,
    ) -> Result<f64> {
        check_lr(lr)?;
        let (grads, loss) = self.bptt_gradients(trace, truncation)?;
        self.apply_gradients(&grads, lr);
        Ok(loss)
    }

    /// Analytic BPTT gradients without applying them. Replays the episode
    /// first and rejects traces whose stored hidden states do not match the
    /// recomputed dynamics within [`TRACE_TOLERANCE`].
    pub fn bptt_gradients(
        &self,
        trace: &EpisodeTrace,
        truncation: Option<usize>,
    ) -> Result<(NetGrads, f64)> {
        if !self.is_recurrent() {
            return Err(Error::Config(
                "bptt_train requires a recurrent network; use backprop_layered".into(),
            ));
        }
        if let Some(w) = truncation {
            if w == 0 {
                return Err(Error::Config("truncation window must be at least 1".into()));
            }
        }
        let mut grads = NetGrads::zeros_like(self);
        if trace.is_empty() {
            return Ok((grads, 0.0));
        }

        // Replay pass: recompute every step's activation stack and verify
        // the stored hidden states line up.
        let steps = trace.steps();
        let mut stacks = Vec::with_capacity(steps.len());
        let mut state = RnnState::new(steps[0].hidden_before.clone());
        for (t, step) in steps.iter().enumerate() {
            let drift = max_abs_diff(state.hidden(), &step.hidden_before).ok_or_else(|| {
                Error::Shape(format!("trace step {t} hidden state has wrong length"))
            })?;
            if drift > TRACE_TOLERANCE {
                return Err(Error::Integrity(format!(
                    "trace step {t}: stored hidden state deviates from replay by {drift:e}"
                )));
            }
            if let Some(target) = &step.target {
                check_target(&target.values, &target.mask, self.output_size())?;
            }
            let acts = self.rnn_step_activations(&state, &step.input)?;
            state = RnnState::new(acts[1].clone());
            stacks.push(acts);
        }

        // Backward pass over time. `carry` holds dE/dh_t flowing in from
        // steps after t.
        let activation = self.activation();
        let rec = self.recurrent().unwrap();
        let mut total_loss = 0.0;
        let mut carry = vec![0.0; self.hidden_size()];
        for t in (0..steps.len()).rev() {
            let acts = &stacks[t];
            if let Some(target) = &steps[t].target {
                total_loss += self.accumulate_step_gradients(
                    acts,
                    &target.values,
                    &target.mask,
                    &mut grads,
                    Some(&mut carry),
                );
            }
            // dE/dz at the hidden layer of step t.
            let delta_h: Vec<f64> = carry
                .iter()
                .zip(acts[1].iter())
                .map(|(&c, &h)| c * activation.derivative_from_output(h))
                .collect();
            let hidden_prev = &steps[t].hidden_before;
            grads.weights[0].acc_outer(&acts[0], &delta_h, 1.0);
            if self.train_bias() {
                add_scaled_vec(&mut grads.biases[0], &delta_h, 1.0);
            }
            grads
                .recurrent
                .as_mut()
                .unwrap()
                .acc_outer(hidden_prev, &delta_h, 1.0);

            let at_chunk_boundary = truncation.is_some_and(|w| t % w == 0);
            carry = vec![0.0; self.hidden_size()];
            if !at_chunk_boundary {
                rec.acc_backward(&delta_h, &mut carry);
            }
        }
        Ok((grads, total_loss))
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() {
        return None;
    }
    Some(
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationSpec;
    use crate::linalg::Mat;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rnn(layer_sizes: &[usize], seed: u64) -> NetworkWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net =
            NetworkWeights::zeros(layer_sizes, true, ActivationSpec::symmetric_sigmoid())
                .unwrap();
        for l in 0..net.num_layers() {
            for v in net.weight_mut(l).data_mut() {
                *v = rng.random_range(-0.8..0.8);
            }
            for v in net.bias_mut(l).iter_mut() {
                *v = rng.random_range(-0.3..0.3);
            }
        }
        for v in net.recurrent_mut().unwrap().data_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
        net
    }

    #[test]
    fn identity_recurrence_with_linear_units_preserves_state() {
        let mut net =
            NetworkWeights::zeros(&[2, 3, 1], true, ActivationSpec::linear()).unwrap();
        *net.recurrent_mut().unwrap() = Mat::scaled_identity(3, 1.0);
        let mut state = RnnState::new(vec![0.3, -0.7, 0.05]);
        let initial = state.clone();
        for _ in 0..50 {
            let (next, _) = net.rnn_step(&state, &[0.0, 0.0]).unwrap();
            state = next;
        }
        assert_eq!(state, initial);
    }

    #[test]
    fn zero_state_zero_input_is_a_fixed_point() {
        // Odd activation and zero biases make the origin a fixed point no
        // matter what the weight matrices look like.
        let mut net =
            NetworkWeights::zeros(&[3, 4, 2], true, ActivationSpec::symmetric_sigmoid())
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for v in net.weight_mut(0).data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in net.recurrent_mut().unwrap().data_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        let (state, out) = net.rnn_step(&RnnState::zeros(4), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(state.hidden(), &[0.0; 4]);
        assert_eq!(out, vec![0.0, 0.0]);
    }

    // Manual unroll oracle for a 2-unit RNN over 3 steps, written as bare
    // arithmetic against the same parameter values.
    #[test]
    fn trajectory_matches_hand_unrolled_oracle() {
        let mut net =
            NetworkWeights::zeros(&[1, 2, 1], true, ActivationSpec::symmetric_sigmoid())
                .unwrap();
        net.weight_mut(0)[(0, 0)] = 0.4;
        net.weight_mut(0)[(0, 1)] = -0.6;
        net.bias_mut(0)[0] = 0.1;
        net.bias_mut(0)[1] = -0.05;
        let r = net.recurrent_mut().unwrap();
        r[(0, 0)] = 0.9;
        r[(0, 1)] = 0.2;
        r[(1, 0)] = -0.3;
        r[(1, 1)] = 0.7;
        net.weight_mut(1)[(0, 0)] = 1.1;
        net.weight_mut(1)[(1, 0)] = -0.8;
        net.bias_mut(1)[0] = 0.02;

        let sig = |x: f64| 1.0 / (1.0 + (-x).exp()) - 0.5;
        let inputs = [0.5, -0.2, 0.9];
        let mut h = [0.0f64, 0.0];
        let mut oracle_states = Vec::new();
        for x in inputs {
            let z0 = 0.4 * x + 0.9 * h[0] + (-0.3) * h[1] + 0.1;
            let z1 = -0.6 * x + 0.2 * h[0] + 0.7 * h[1] - 0.05;
            h = [sig(z0), sig(z1)];
            oracle_states.push(h);
        }

        let mut state = RnnState::zeros(2);
        for (x, want) in inputs.iter().zip(oracle_states.iter()) {
            let (next, _) = net.rnn_step(&state, &[*x]).unwrap();
            for (g, w) in next.hidden().iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-12, "got {g}, want {w}");
            }
            state = next;
        }
    }

    #[test]
    fn rnn_step_rejects_shape_mismatches() {
        let net = random_rnn(&[3, 4, 2], 10);
        assert!(matches!(
            net.rnn_step(&RnnState::zeros(4), &[1.0]),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            net.rnn_step(&RnnState::zeros(2), &[1.0, 2.0, 3.0]),
            Err(Error::Shape(_))
        ));
    }

    /// Roll an episode with the given inputs, attaching targets to every
    /// step (mask all-true), and return the trace.
    fn record_episode(
        net: &NetworkWeights,
        inputs: &[Vec<f64>],
        targets: &[Option<StepTarget>],
    ) -> EpisodeTrace {
        let mut trace = EpisodeTrace::new();
        let mut state = RnnState::zeros(net.hidden_size());
        for (x, tgt) in inputs.iter().zip(targets.iter()) {
            let (next, out) = net.rnn_step(&state, x).unwrap();
            trace.push(TraceStep {
                input: x.clone(),
                hidden_before: state.hidden().to_vec(),
                outputs: out,
                target: tgt.clone(),
            });
            state = next;
        }
        trace
    }

    #[test]
    fn length_one_episode_equals_layered_backprop() {
        let rnn = random_rnn(&[3, 4, 2], 20);
        // Equivalent feedforward network: same layer weights, no recurrence.
        let mut ff = NetworkWeights::zeros(&[3, 4, 2], false, rnn.activation()).unwrap();
        for l in 0..rnn.num_layers() {
            *ff.weight_mut(l) = rnn.weight(l).clone();
            *ff.bias_mut(l) = rnn.bias(l).to_vec();
        }

        let input = vec![0.2, -0.4, 0.7];
        let target = vec![0.3, -0.2];
        let mask = vec![true, true];
        let trace = record_episode(
            &rnn,
            &[input.clone()],
            &[Some(StepTarget {
                values: target.clone(),
                mask: mask.clone(),
            })],
        );

        let mut rnn_trained = rnn.clone();
        rnn_trained.bptt_train(&trace, 0.3, None).unwrap();
        let mut ff_trained = ff.clone();
        ff_trained
            .backprop_layered(&input, &target, &mask, 0.3)
            .unwrap();

        for l in 0..rnn.num_layers() {
            for (a, b) in rnn_trained
                .weight(l)
                .data()
                .iter()
                .zip(ff_trained.weight(l).data().iter())
            {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in rnn_trained.bias(l).iter().zip(ff_trained.bias(l).iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // Zero initial state means the recurrent matrix receives no update.
        assert_eq!(rnn_trained.recurrent(), rnn.recurrent());
    }

    #[test]
    fn all_masks_false_changes_nothing() {
        let net = random_rnn(&[2, 3, 2], 21);
        let inputs: Vec<Vec<f64>> = vec![vec![0.1, 0.3], vec![-0.5, 0.2], vec![0.9, -0.9]];
        let targets = vec![
            Some(StepTarget {
                values: vec![5.0, -5.0],
                mask: vec![false, false],
            });
            3
        ];
        let trace = record_episode(&net, &inputs, &targets);
        let mut trained = net.clone();
        let loss = trained.bptt_train(&trace, 0.5, None).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(trained, net);
    }

    #[test]
    fn stale_trace_is_rejected() {
        let net = random_rnn(&[2, 3, 2], 22);
        let inputs: Vec<Vec<f64>> = vec![vec![0.1, 0.3], vec![-0.5, 0.2]];
        let targets = vec![
            Some(StepTarget {
                values: vec![0.1, 0.1],
                mask: vec![true, true],
            });
            2
        ];
        let mut trace = record_episode(&net, &inputs, &targets);
        // Corrupt the second step's stored hidden state.
        if let Some(step) = trace.steps.get_mut(1) {
            step.hidden_before[0] += 1e-3;
        }
        let mut trained = net.clone();
        let err = trained.bptt_train(&trace, 0.1, None).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    fn episode_loss(net: &NetworkWeights, trace: &EpisodeTrace) -> f64 {
        let mut state = RnnState::new(trace.steps()[0].hidden_before.clone());
        let mut loss = 0.0;
        for step in trace.steps() {
            let (next, out) = net.rnn_step(&state, &step.input).unwrap();
            if let Some(t) = &step.target {
                for ((y, tv), m) in out.iter().zip(t.values.iter()).zip(t.mask.iter()) {
                    if *m {
                        loss += 0.5 * (tv - y) * (tv - y);
                    }
                }
            }
            state = next;
        }
        loss
    }

    /// Central finite differences over every parameter, including the
    /// recurrent matrix.
    fn bptt_fd_max_rel(net: &NetworkWeights, trace: &EpisodeTrace) -> f64 {
        let eps = 1e-5;
        let (grads, _) = net.bptt_gradients(trace, None).unwrap();
        let mut max_rel: f64 = 0.0;
        let mut check = |analytic: f64, plus: f64, minus: f64| {
            let numeric = (plus - minus) / (2.0 * eps);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((analytic - numeric).abs() / denom);
        };
        for l in 0..net.num_layers() {
            for r in 0..net.weight(l).rows() {
                for c in 0..net.weight(l).cols() {
                    let mut p = net.clone();
                    p.weight_mut(l)[(r, c)] += eps;
                    let mut m = net.clone();
                    m.weight_mut(l)[(r, c)] -= eps;
                    check(
                        grads.weights[l][(r, c)],
                        episode_loss(&p, trace),
                        episode_loss(&m, trace),
                    );
                }
            }
            for j in 0..net.bias(l).len() {
                let mut p = net.clone();
                p.bias_mut(l)[j] += eps;
                let mut m = net.clone();
                m.bias_mut(l)[j] -= eps;
                check(
                    grads.biases[l][j],
                    episode_loss(&p, trace),
                    episode_loss(&m, trace),
                );
            }
        }
        let rec = net.recurrent().unwrap();
        for r in 0..rec.rows() {
            for c in 0..rec.cols() {
                let mut p = net.clone();
                p.recurrent_mut().unwrap()[(r, c)] += eps;
                let mut m = net.clone();
                m.recurrent_mut().unwrap()[(r, c)] -= eps;
                check(
                    grads.recurrent.as_ref().unwrap()[(r, c)],
                    episode_loss(&p, trace),
                    episode_loss(&m, trace),
                );
            }
        }
        max_rel
    }

    #[test]
    fn bptt_gradient_matches_finite_differences() {
        let net = random_rnn(&[2, 4, 2], 23);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let inputs: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets: Vec<Option<StepTarget>> = (0..6)
            .map(|_| {
                Some(StepTarget {
                    values: (0..2).map(|_| rng.random_range(-0.4..0.4)).collect(),
                    mask: (0..2).map(|_| rng.random_range(0.0..1.0) < 0.7).collect(),
                })
            })
            .collect();
        let trace = record_episode(&net, &inputs, &targets);
        let rel = bptt_fd_max_rel(&net, &trace);
        assert!(rel < 1e-4, "max relative error {rel}");
    }

    #[test]
    fn truncation_window_covering_episode_equals_full_bptt() {
        let net = random_rnn(&[2, 3, 2], 24);
        let inputs: Vec<Vec<f64>> = vec![vec![0.5, -0.1], vec![0.2, 0.2], vec![-0.7, 0.4]];
        let targets = vec![
            Some(StepTarget {
                values: vec![0.2, -0.2],
                mask: vec![true, true],
            });
            3
        ];
        let trace = record_episode(&net, &inputs, &targets);
        let (full, _) = net.bptt_gradients(&trace, None).unwrap();
        let (windowed, _) = net.bptt_gradients(&trace, Some(10)).unwrap();
        for (a, b) in full.weights[0]
            .data()
            .iter()
            .zip(windowed.weights[0].data().iter())
        {
            assert_eq!(a, b);
        }
        for (a, b) in full
            .recurrent
            .as_ref()
            .unwrap()
            .data()
            .iter()
            .zip(windowed.recurrent.as_ref().unwrap().data().iter())
        {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn replay_is_bit_exact() {
        let net = random_rnn(&[3, 5, 2], 25);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inputs: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let targets = vec![None; 10];
        let trace = record_episode(&net, &inputs, &targets);
        // Replaying through bptt_gradients must accept the trace: identical
        // code path implies bit-exact hidden states, well inside tolerance.
        let mut state = RnnState::zeros(net.hidden_size());
        for step in trace.steps() {
            assert_eq!(state.hidden(), step.hidden_before.as_slice());
            let (next, _) = net.rnn_step(&state, &step.input).unwrap();
            state = next;
        }
        assert!(net.bptt_gradients(&trace, None).is_ok());
    }
}
