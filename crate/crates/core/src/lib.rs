//! End-to-end reinforcement learning at desk scale.
//!
//! The crate wires four pieces together:
//!
//! - [`net`]: feedforward and recurrent networks trained by exact
//!   backpropagation / backpropagation through time, with identity feedback
//!   initialization for the recurrent matrix.
//! - [`rl`]: TD-family learners (Q-learning, actor-critic, and the Actor-Q
//!   hybrid) that turn rewards into masked per-output training signals.
//! - [`env`]: seeded simulators with raw receptive-field observations — the
//!   invisible-moving-object capture task, a delayed-cue memory task, a 1-D
//!   reaching task, and a 5-state chain MDP used as an oracle.
//! - [`harness`]: the config-driven experiment runner (training loops,
//!   checkpoints, logs, resume) behind the `emrl` CLI, plus [`analysis`]
//!   for linear probes and behavioral statistics over finished runs.

pub mod activation;
pub mod analysis;
pub mod env;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod net;
pub mod rl;
pub mod rng;

pub use activation::{ActivationKind, ActivationSpec};
pub use error::{Error, Result};
pub use linalg::Mat;
pub use net::{EpisodeTrace, NetGrads, NetworkWeights, RnnState, StepTarget, TraceStep};
