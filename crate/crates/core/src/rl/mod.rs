//! Off-policy actor-critic training around the spiking actor.

pub mod agent;
pub mod buffer;
pub mod train;

pub use agent::{Agent, AgentConfig, AgentCounters, AgentState, Algorithm, UpdateInfo};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use train::{evaluate, train, EvalPoint, Trainer, TrainerState};
