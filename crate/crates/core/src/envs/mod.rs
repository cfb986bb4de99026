//! Test fixtures: pendulum swing-up and drifting Gaussian streams.

pub mod drift;
pub mod pendulum;
pub mod tracking;

pub use drift::{DriftStream, Regime, StreamConfig, Truth};
pub use pendulum::{PendulumConfig, PendulumEnv, StepResult};
pub use tracking::{tracking_benchmark, TracePoint, Tracker, TrackingResult};
