//! Spiking actor, dense critic, and the shared layer/optimizer plumbing.

pub mod actor;
pub mod critic;
pub mod linear;
pub mod neuron;

pub use actor::{ActorConfig, ActorGrads, ActorNet, ActorWeights, FusedActor, StatsSource};
pub use critic::{CriticCache, CriticGrads, CriticNet};
pub use linear::{soft_update, Adam, Linear, ParamSet};
pub use neuron::{surrogate_grad, NeuronModel, NeuronParams, NeuronState, SpikeFn};
