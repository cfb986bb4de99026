//! Confidence-adaptive, periodically recalibrated batch-norm statistics for
//! spiking actor-critic agents.
//!
//! * [`stats`]: EMA, confidence-adaptive and pooled-recalibration estimators.
//! * [`norm`]: batch norm with separate training/inference statistic sources.
//! * [`snn`]: LIF/CLIF spiking actor with surrogate-gradient BPTT, dense critic.
//! * [`rl`]: replay buffer and DDPG/TD3 agents wired to the estimators.
//! * [`envs`]: pendulum swing-up and synthetic drifting Gaussian streams.
//! * [`harness`]: experiment configs, CSV output, checkpoints, APG.

// Validation uses `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod envs;
pub mod error;
pub mod harness;
pub mod norm;
pub mod rl;
pub mod snn;
pub mod stats;

pub use error::{Error, Result};
pub use norm::{NormLayer, NormParams};
pub use stats::{BatchStats, EstimatorConfig, EstimatorMode, MovingStats};
