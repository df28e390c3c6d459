//! Unit activation functions.
//!
//! The default is an odd, bounded "symmetric sigmoid": the logistic shifted
//! to pass through the origin and scaled so its range is
//! (-output_scale/2, +output_scale/2). Being odd keeps the all-zero hidden
//! state a fixed point, which the identity feedback initialization relies on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of the half-range that training targets may occupy. Sigmoid
/// outputs can never reach the asymptote, so targets are pulled slightly
/// inside to stay attainable.
pub const TARGET_MARGIN: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationKind {
    SymmetricSigmoid,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActivationSpec {
    pub kind: ActivationKind,
    pub output_scale: f64,
}

impl ActivationSpec {
    /// Symmetric sigmoid with range (-0.5, +0.5).
    pub fn symmetric_sigmoid() -> Self {
        ActivationSpec {
            kind: ActivationKind::SymmetricSigmoid,
            output_scale: 1.0,
        }
    }

    pub fn linear() -> Self {
        ActivationSpec {
            kind: ActivationKind::Linear,
            output_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.output_scale.is_finite() && self.output_scale > 0.0) {
            return Err(Error::Config(format!(
                "activation output_scale must be a positive finite number, got {}",
                self.output_scale
            )));
        }
        Ok(())
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self.kind {
            ActivationKind::SymmetricSigmoid => self.output_scale * (logistic(x) - 0.5),
            ActivationKind::Linear => x,
        }
    }

    /// Derivative expressed through the activation value `y = f(x)`.
    pub fn derivative_from_output(&self, y: f64) -> f64 {
        match self.kind {
            ActivationKind::SymmetricSigmoid => {
                let s = self.output_scale;
                let u = y / s;
                s * (0.25 - u * u)
            }
            ActivationKind::Linear => 1.0,
        }
    }

    /// f'(0); the symmetric sigmoid has slope output_scale/4 at the origin.
    pub fn slope_at_zero(&self) -> f64 {
        match self.kind {
            ActivationKind::SymmetricSigmoid => self.output_scale / 4.0,
            ActivationKind::Linear => 1.0,
        }
    }

    /// Half-width of the output range, infinite for linear units.
    pub fn half_range(&self) -> f64 {
        match self.kind {
            ActivationKind::SymmetricSigmoid => self.output_scale / 2.0,
            ActivationKind::Linear => f64::INFINITY,
        }
    }

    /// Clamp a training target into the attainable part of the range.
    pub fn clamp_target(&self, t: f64) -> f64 {
        let bound = self.half_range() * TARGET_MARGIN;
        if bound.is_finite() {
            t.clamp(-bound, bound)
        } else {
            t
        }
    }
}

/// Numerically stable logistic function.
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
