//! Pendulum swing-up with the classic control dynamics.
//!
//! `θ = 0` is upright. Observation is `(cos θ, sin θ, θ̇)`, action is a torque
//! clipped to `±max_torque`, and the reward penalizes angle, speed and effort.
//! Episodes never terminate; they are truncated after `episode_len` steps.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumConfig {
    pub max_torque: f64,
    pub max_speed: f64,
    pub dt: f64,
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub episode_len: usize,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        Self { max_torque: 2.0, max_speed: 8.0, dt: 0.05, g: 10.0, m: 1.0, l: 1.0, episode_len: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub obs: [f64; 3],
    pub reward: f64,
    /// Genuine termination. Always false for the pendulum.
    pub terminated: bool,
    /// Time-limit truncation.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumEnv {
    cfg: PendulumConfig,
    theta: f64,
    theta_dot: f64,
    steps: usize,
}

/// Wrap an angle into `[−π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

impl PendulumEnv {
    pub const OBS_DIM: usize = 3;
    pub const ACTION_DIM: usize = 1;

    pub fn new(cfg: PendulumConfig) -> Self {
        Self { cfg, theta: PI, theta_dot: 0.0, steps: 0 }
    }

    pub fn config(&self) -> &PendulumConfig {
        &self.cfg
    }

    /// Uniform random start: `θ ∈ [−π, π)`, `θ̇ ∈ [−1, 1)`.
    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; 3] {
        self.theta = rng.random_range(-PI..PI);
        self.theta_dot = rng.random_range(-1.0..1.0);
        self.steps = 0;
        self.observation()
    }

    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
        self.steps = 0;
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    pub fn observation(&self) -> [f64; 3] {
        [self.theta.cos(), self.theta.sin(), self.theta_dot]
    }

    /// Unforced first integral of the dynamics, `½θ̇² + (3g/2l)·cos θ`.
    pub fn energy(&self) -> f64 {
        let k = 3.0 * self.cfg.g / (2.0 * self.cfg.l);
        0.5 * self.theta_dot * self.theta_dot + k * self.theta.cos()
    }

    /// Lowest reward a single step can produce.
    pub fn min_reward(&self) -> f64 {
        -(PI * PI + 0.1 * self.cfg.max_speed.powi(2) + 0.001 * self.cfg.max_torque.powi(2))
    }

    /// Symplectic Euler step: velocity first, then angle with the new velocity.
    pub fn step(&mut self, torque: f64) -> StepResult {
        let c = &self.cfg;
        let u = if torque.is_finite() { torque.clamp(-c.max_torque, c.max_torque) } else { 0.0 };
        let th = wrap_angle(self.theta);
        let reward = -(th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u);

        let acc = 3.0 * c.g / (2.0 * c.l) * self.theta.sin() + 3.0 / (c.m * c.l * c.l) * u;
        self.theta_dot = (self.theta_dot + acc * c.dt).clamp(-c.max_speed, c.max_speed);
        self.theta += self.theta_dot * c.dt;
        self.steps += 1;
        StepResult {
            obs: self.observation(),
            reward,
            terminated: false,
            truncated: self.steps >= c.episode_len,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hanging_rest_is_equilibrium() {
        let mut env = PendulumEnv::new(PendulumConfig::default());
        env.set_state(PI, 0.0);
        for _ in 0..200 {
            env.step(0.0);
        }
        let (th, thd) = env.state();
        assert!((th - PI).abs() < 1e-9, "{th}");
        assert!(thd.abs() < 1e-9);
    }

    #[test]
    fn upright_rest_has_zero_reward() {
        let mut env = PendulumEnv::new(PendulumConfig::default());
        env.set_state(0.0, 0.0);
        for _ in 0..200 {
            let r = env.step(0.0);
            assert_eq!(r.reward, 0.0);
        }
        assert_eq!(env.state(), (0.0, 0.0));
    }

    #[test]
    fn truncates_at_episode_length() {
        let mut env = PendulumEnv::new(PendulumConfig::default());
        env.set_state(1.0, 0.0);
        for i in 1..=200 {
            let r = env.step(1.0);
            assert!(!r.terminated);
            assert_eq!(r.truncated, i == 200);
        }
    }

    #[test]
    fn clips_torque_and_speed() {
        let mut env = PendulumEnv::new(PendulumConfig::default());
        env.set_state(PI, 7.9);
        let r = env.step(100.0);
        assert!(env.state().1 <= 8.0);
        assert!(r.reward >= env.min_reward());
        assert!((r.reward - -(0.1 * 7.9 * 7.9 + 0.001 * 4.0 + PI * PI)).abs() < 1e-9);
    }

    #[test]
    fn wraps_angles() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert!((wrap_angle(-PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }
}
