//! Feedforward and fully recurrent networks with exact-gradient training.
//!
//! Weights live in plain dense matrices and all gradients are derived by
//! hand: single-step backpropagation for layered networks and
//! backpropagation through time over an [`EpisodeTrace`] for recurrent ones.
//! Both gradient paths are validated against central finite differences in
//! the test suites.

mod checkpoint;
mod init;
mod recurrent;

pub use checkpoint::{load_weights, read_weights, save_weights, write_weights};
pub(crate) use checkpoint::hex_digest;
pub use init::{init_identity_feedback, init_random, RecurrentInit};
pub use recurrent::{EpisodeTrace, RnnState, StepTarget, TraceStep};

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::linalg::{add_scaled_vec, Mat};

/// All learnable parameters of one network.
///
/// `layer_sizes` is `[input, hidden..., output]`; `weights[l]` has shape
/// (fan_in, fan_out) between layers `l` and `l+1`. A recurrent network
/// additionally carries a square matrix feeding the first hidden layer's
/// previous activations back into itself.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkWeights {
    layer_sizes: Vec<usize>,
    weights: Vec<Mat>,
    biases: Vec<Vec<f64>>,
    recurrent: Option<Mat>,
    activation: ActivationSpec,
    train_bias: bool,
}

/// Gradient buffers mirroring the shapes of [`NetworkWeights`].
#[derive(Debug, Clone)]
pub struct NetGrads {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
    pub recurrent: Option<Mat>,
}

impl NetworkWeights {
    /// All-zero network. Recurrent networks need at least one hidden layer.
    pub fn zeros(
        layer_sizes: &[usize],
        recurrent: bool,
        activation: ActivationSpec,
    ) -> Result<Self> {
        activation.validate()?;
        if layer_sizes.len() < 2 {
            return Err(Error::Config(
                "a network needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config("layer sizes must all be positive".into()));
        }
        if recurrent && layer_sizes.len() < 3 {
            return Err(Error::Config(
                "a recurrent network needs at least one hidden layer".into(),
            ));
        }
        let weights = layer_sizes
            .windows(2)
            .map(|w| Mat::zeros(w[0], w[1]))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        let rec = recurrent.then(|| Mat::zeros(layer_sizes[1], layer_sizes[1]));
        Ok(NetworkWeights {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            recurrent: rec,
            activation,
            train_bias: true,
        })
    }

    /// Disable bias training; biases stay at zero. With one-hot inputs and
    /// linear activation this makes a single-layer network an exact Q table.
    pub fn set_train_bias(&mut self, on: bool) {
        self.train_bias = on;
    }

    pub fn train_bias(&self) -> bool {
        self.train_bias
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Size of the first hidden layer, the one recurrence feeds back into.
    pub fn hidden_size(&self) -> usize {
        self.layer_sizes[1]
    }

    pub fn is_recurrent(&self) -> bool {
        self.recurrent.is_some()
    }

    pub fn activation(&self) -> ActivationSpec {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, layer: usize) -> &Mat {
        &self.weights[layer]
    }

    pub fn weight_mut(&mut self, layer: usize) -> &mut Mat {
        &mut self.weights[layer]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<f64> {
        &mut self.biases[layer]
    }

    pub fn recurrent(&self) -> Option<&Mat> {
        self.recurrent.as_ref()
    }

    pub fn recurrent_mut(&mut self) -> Option<&mut Mat> {
        self.recurrent.as_mut()
    }

    pub fn num_params(&self) -> usize {
        let w: usize = self
            .weights
            .iter()
            .map(|m| m.rows() * m.cols())
            .sum::<usize>();
        let b: usize = self.biases.iter().map(|v| v.len()).sum::<usize>();
        let r = self
            .recurrent
            .as_ref()
            .map_or(0, |m| m.rows() * m.cols());
        w + b + r
    }

    pub fn check_finite(&self) -> Result<()> {
        let ok = self.weights.iter().all(|m| m.is_finite())
            && self.biases.iter().flatten().all(|v| v.is_finite())
            && self.recurrent.as_ref().map_or(true, |m| m.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::NonFinite("network weights".into()))
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "input length {} does not match input layer size {}",
                input.len(),
                self.input_size()
            )));
        }
        Ok(())
    }

    /// Forward pass of a layered (non-recurrent) network.
    pub fn forward_layered(&self, input: &[f64]) -> Result<Vec<f64>> {
        if self.is_recurrent() {
            return Err(Error::Config(
                "forward_layered requires a non-recurrent network; use rnn_step".into(),
            ));
        }
        self.check_input(input)?;
        Ok(self.forward_activations(input)?.pop().unwrap())
    }

    /// First hidden layer's activations for one feedforward pass; the
    /// feedforward analog of a recurrent hidden state for probing.
    pub fn hidden_activations(&self, input: &[f64]) -> Result<Vec<f64>> {
        if self.is_recurrent() {
            return Err(Error::Config(
                "hidden_activations is the feedforward path; use rnn_step".into(),
            ));
        }
        let mut acts = self.forward_activations(input)?;
        Ok(acts.swap_remove(1))
    }

    /// Forward pass keeping every layer's activations, `[a0, a1, ..., aL]`.
    fn forward_activations(&self, input: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_input(input)?;
        let mut acts = Vec::with_capacity(self.layer_sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.weights.len() {
            let z = self.layer_preactivation(l, acts.last().unwrap());
            acts.push(z.iter().map(|&v| self.activation.apply(v)).collect());
        }
        Ok(acts)
    }

    fn layer_preactivation(&self, l: usize, a: &[f64]) -> Vec<f64> {
        let mut z = self.biases[l].clone();
        self.weights[l].acc_forward(a, &mut z);
        z
    }

    /// One online gradient step on the masked squared error
    /// `0.5 * sum_masked (target - output)^2`. Returns the pre-update loss.
    pub fn backprop_layered(
        &mut self,
        input: &[f64],
        target: &[f64],
        mask: &[bool],
        lr: f64,
    ) -> Result<f64> {
        let (grads, loss) = self.backprop_gradients(input, target, mask)?;
        check_lr(lr)?;
        self.apply_gradients(&grads, lr);
        Ok(loss)
    }

    /// Analytic gradients of the masked squared error for one input, without
    /// applying them. Exposed so finite-difference checks can compare.
    pub fn backprop_gradients(
        &self,
        input: &[f64],
        target: &[f64],
        mask: &[bool],
    ) -> Result<(NetGrads, f64)> {
        if self.is_recurrent() {
            return Err(Error::Config(
                "backprop_layered requires a non-recurrent network; use bptt_train".into(),
            ));
        }
        check_target(target, mask, self.output_size())?;
        let acts = self.forward_activations(input)?;
        let mut grads = NetGrads::zeros_like(self);
        let loss = self.accumulate_step_gradients(&acts, target, mask, &mut grads, None);
        Ok((grads, loss))
    }

    /// Backprop the masked error of one step's activation stack into `grads`.
    /// Returns the step loss; `carry_into_hidden` receives dE/da1 if given
    /// (used by BPTT to thread credit through time).
    pub(crate) fn accumulate_step_gradients(
        &self,
        acts: &[Vec<f64>],
        target: &[f64],
        mask: &[bool],
        grads: &mut NetGrads,
        mut carry_into_hidden: Option<&mut Vec<f64>>,
    ) -> f64 {
        let output = acts.last().unwrap();
        let mut loss = 0.0;
        // delta = dE/dz at the output layer
        let mut delta: Vec<f64> = output
            .iter()
            .zip(target.iter().zip(mask.iter()))
            .map(|(&y, (&t, &m))| {
                if !m {
                    return 0.0;
                }
                let e = t - y;
                loss += 0.5 * e * e;
                -e * self.activation.derivative_from_output(y)
            })
            .collect();

        let last = self.weights.len() - 1;
        for l in (0..=last).rev() {
            grads.weights[l].acc_outer(&acts[l], &delta, 1.0);
            if self.train_bias {
                add_scaled_vec(&mut grads.biases[l], &delta, 1.0);
            }
            if l == 0 {
                break;
            }
            let mut upstream = vec![0.0; self.layer_sizes[l]];
            self.weights[l].acc_backward(&delta, &mut upstream);
            if l == 1 {
                if let Some(carry) = carry_into_hidden.take() {
                    add_scaled_vec(carry, &upstream, 1.0);
                    return loss;
                }
            }
            delta = upstream
                .iter()
                .zip(acts[l].iter())
                .map(|(&u, &a)| u * self.activation.derivative_from_output(a))
                .collect();
        }
        loss
    }

    /// Gradient-descent update: params -= lr * grads.
    pub fn apply_gradients(&mut self, grads: &NetGrads, lr: f64) {
        for (w, g) in self.weights.iter_mut().zip(grads.weights.iter()) {
            w.add_scaled(g, -lr);
        }
        if self.train_bias {
            for (b, g) in self.biases.iter_mut().zip(grads.biases.iter()) {
                add_scaled_vec(b, g, -lr);
            }
        }
        if let (Some(r), Some(g)) = (self.recurrent.as_mut(), grads.recurrent.as_ref()) {
            r.add_scaled(g, -lr);
        }
    }
}

impl NetGrads {
    pub fn zeros_like(net: &NetworkWeights) -> Self {
        NetGrads {
            weights: net
                .weights
                .iter()
                .map(|m| Mat::zeros(m.rows(), m.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            recurrent: net
                .recurrent
                .as_ref()
                .map(|m| Mat::zeros(m.rows(), m.cols())),
        }
    }
}

fn check_lr(lr: f64) -> Result<()> {
    if !(lr.is_finite() && lr > 0.0) {
        return Err(Error::Config(format!(
            "learning rate must be positive and finite, got {lr}"
        )));
    }
    Ok(())
}

fn check_target(target: &[f64], mask: &[bool], output_size: usize) -> Result<()> {
    if target.len() != output_size || mask.len() != output_size {
        return Err(Error::Shape(format!(
            "target/mask lengths {}/{} do not match output size {}",
            target.len(),
            mask.len(),
            output_size
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training target".into()));
    }
    Ok(())
}
