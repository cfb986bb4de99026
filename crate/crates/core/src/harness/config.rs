//! TOML experiment configuration.
//!
//! ```toml
//! name = "pendulum"
//! task = "rl"                 # or "track"
//! seeds = [1, 2, 3, 4, 5]
//! modes = ["ca_re", "ema"]    # one run per (mode, seed)
//! output_dir = "pendulum"     # relative paths resolve against the output root
//!
//! [estimator]                 # shared parameters; the mode comes from `modes`
//! alpha = 0.1
//! t_cal = 1000
//! m_cal = 20
//!
//! [agent]                     # rl only; any AgentConfig field except `estimator`
//! total_steps = 50000
//! actor_hidden = [64, 64]
//!
//! [env]                       # rl only; pendulum parameters
//! max_torque = 2.0
//!
//! [stream]                    # track only
//! regime = { kind = "sinusoidal", amplitude = 1.0, period = 100.0, var_amplitude = 0.0 }
//! batch_size = 256
//! iterations = 10000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::envs::{PendulumConfig, StreamConfig};
use crate::error::{Error, Result};
use crate::rl::AgentConfig;
use crate::stats::{EstimatorConfig, EstimatorMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Track,
    Rl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub task: Task,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub modes: Vec<EstimatorMode>,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub agent: AgentConfig,
    #[serde(default)]
    pub env: PendulumConfig,
    #[serde(default)]
    pub stream: Option<StreamConfig>,
    /// Iterations excluded from tracking MSE summaries.
    #[serde(default)]
    pub burn_in: usize,
    /// Environment steps between checkpoints; 0 writes only the final one.
    #[serde(default)]
    pub checkpoint_interval: u64,
}

fn default_name() -> String {
    "experiment".to_string()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let parse_err = |e: toml::de::Error| Error::Config(e.to_string());
        let raw: toml::Table = toml::from_str(text).map_err(parse_err)?;
        let mut v = Vec::new();
        if let Some(toml::Value::Table(agent)) = raw.get("agent") {
            if agent.contains_key("estimator") {
                v.push("agent.estimator is not accepted; use the [estimator] table and `modes`".to_string());
            }
        }
        let cfg: Self = toml::from_str(text).map_err(parse_err)?;
        v.extend(cfg.violations());
        if v.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// The configured modes, or the `[estimator]` mode when none are listed.
    pub fn effective_modes(&self) -> Vec<EstimatorMode> {
        if self.modes.is_empty() {
            vec![self.estimator.mode]
        } else {
            self.modes.clone()
        }
    }

    pub fn estimator_for(&self, mode: EstimatorMode) -> EstimatorConfig {
        EstimatorConfig { mode, ..self.estimator }
    }

    pub fn agent_for(&self, mode: EstimatorMode) -> AgentConfig {
        AgentConfig { estimator: self.estimator_for(mode), ..self.agent.clone() }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.seeds.is_empty() {
            v.push("seeds must list at least one seed".to_string());
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            v.push("seeds must be distinct".to_string());
        }
        let modes = self.effective_modes();
        for (i, m) in modes.iter().enumerate() {
            if modes[..i].contains(m) {
                v.push(format!("modes lists `{m}` twice"));
            }
        }
        if self.name.is_empty() {
            v.push("name must be nonempty".to_string());
        }
        v.extend(self.estimator.violations("estimator."));
        match self.task {
            Task::Rl => {
                let agent = AgentConfig { estimator: self.estimator, ..self.agent.clone() };
                v.extend(agent.violations("agent.").into_iter().filter(|s| !s.starts_with("agent.estimator.")));
                v.extend(env_violations(&self.env));
            }
            Task::Track => match &self.stream {
                None => v.push("stream is required for task = \"track\"".to_string()),
                Some(s) => {
                    v.extend(s.violations("stream."));
                    if self.burn_in >= s.iterations && s.iterations > 0 {
                        v.push("burn_in must be smaller than stream.iterations".to_string());
                    }
                    if self.effective_modes().iter().any(|m| m.recalibrates()) && self.estimator.m_cal > 4096 {
                        v.push("estimator.m_cal must be <= 4096 for tracking".to_string());
                    }
                }
            },
        }
        v
    }

    /// `output_dir` resolved against `root` unless it is absolute.
    pub fn output_path(&self, root: &Path) -> PathBuf {
        if self.output_dir.is_absolute() {
            self.output_dir.clone()
        } else {
            root.join(&self.output_dir)
        }
    }
}

fn env_violations(e: &PendulumConfig) -> Vec<String> {
    let mut v = Vec::new();
    for (name, x) in [("max_torque", e.max_torque), ("max_speed", e.max_speed), ("dt", e.dt), ("m", e.m), ("l", e.l)] {
        if !(x > 0.0 && x.is_finite()) {
            v.push(format!("env.{name} must be positive"));
        }
    }
    if !e.g.is_finite() {
        v.push("env.g must be finite".to_string());
    }
    if e.episode_len == 0 {
        v.push("env.episode_len must be positive".to_string());
    }
    v
}
