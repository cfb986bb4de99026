//! Off-policy actor-critic agent (DDPG or TD3) with a spiking actor.
//!
//! Actions for interaction come from the actor's moving statistics; every
//! gradient update runs the actor on mini-batch statistics and then feeds
//! those statistics to the estimators. On the recalibration schedule the
//! moving statistics are replaced by statistics pooled over fresh replay
//! batches.

use ndarray::{Array1, Array2, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::ReplayBuffer;
use crate::error::{Error, Result};
use crate::snn::{soft_update, ActorConfig, ActorNet, ActorWeights, Adam, CriticNet, NeuronModel, NeuronParams, StatsSource};
use crate::stats::{BatchStats, EstimatorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ddpg,
    Td3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    /// Std of the Gaussian exploration noise, as a fraction of the action scale.
    pub exploration_noise: f64,
    pub policy_delay: usize,
    /// Std of the target policy smoothing noise, as a fraction of the action scale.
    pub target_noise: f64,
    /// Clip of the smoothing noise, as a fraction of the action scale.
    pub noise_clip: f64,
    pub estimator: EstimatorConfig,
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub buffer_capacity: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub timesteps: usize,
    pub neuron: NeuronModel,
    pub neuron_params: NeuronParams,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Td3,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            actor_lr: 1e-3,
            critic_lr: 1e-3,
            exploration_noise: 0.1,
            policy_delay: 2,
            target_noise: 0.2,
            noise_clip: 0.5,
            estimator: EstimatorConfig::default(),
            total_steps: 50_000,
            warmup_steps: 1_000,
            buffer_capacity: 1_000_000,
            eval_interval: 5_000,
            eval_episodes: 10,
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 256],
            timesteps: 5,
            neuron: NeuronModel::Clif,
            neuron_params: NeuronParams::default(),
        }
    }
}

impl AgentConfig {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = self.estimator.violations(&format!("{prefix}estimator."));
        out.extend(self.neuron_params.violations(&format!("{prefix}neuron_params.")));
        let mut bad = |ok: bool, msg: &str| {
            if !ok {
                out.push(format!("{prefix}{msg}"));
            }
        };
        bad(self.gamma > 0.0 && self.gamma < 1.0, "gamma must lie in (0, 1)");
        bad(self.tau > 0.0 && self.tau <= 1.0, "tau must lie in (0, 1]");
        bad(self.batch_size >= 2, "batch_size must be >= 2");
        bad(self.actor_lr > 0.0 && self.critic_lr > 0.0, "learning rates must be positive");
        bad(self.exploration_noise >= 0.0, "exploration_noise must be nonnegative");
        bad(self.policy_delay >= 1, "policy_delay must be >= 1");
        bad(self.target_noise >= 0.0 && self.noise_clip >= 0.0, "target_noise and noise_clip must be nonnegative");
        bad(self.warmup_steps >= self.batch_size as u64, "warmup_steps must be >= batch_size");
        bad(self.buffer_capacity >= self.batch_size, "buffer_capacity must be >= batch_size");
        bad(self.eval_interval >= 1, "eval_interval must be >= 1");
        bad(self.eval_episodes >= 1, "eval_episodes must be >= 1");
        bad(!self.actor_hidden.is_empty() && !self.actor_hidden.contains(&0), "actor_hidden must list positive widths");
        bad(!self.critic_hidden.contains(&0), "critic_hidden widths must be positive");
        bad(self.timesteps >= 1, "timesteps must be >= 1");
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations("");
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    fn num_critics(&self) -> usize {
        match self.algorithm {
            Algorithm::Ddpg => 1,
            Algorithm::Td3 => 2,
        }
    }
}

/// Bookkeeping for routing and overhead checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentCounters {
    pub updates: u64,
    pub actor_updates: u64,
    pub recalibrations: u64,
    /// Batch-statistic forwards spent on recalibration.
    pub calibration_forwards: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub critic_loss: f64,
    pub actor_loss: Option<f64>,
    pub mean_target: f64,
    pub recalibrated: bool,
}

/// Complete serializable agent state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub cfg: AgentConfig,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub action_scale: f64,
    pub actor: ActorWeights,
    pub actor_target: ActorWeights,
    pub critics: Vec<CriticNet>,
    pub critic_targets: Vec<CriticNet>,
    pub actor_opt: Adam,
    pub critic_opts: Vec<Adam>,
    pub counters: AgentCounters,
}

#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    action_scale: f64,
    pub actor: ActorNet,
    pub actor_target: ActorNet,
    pub critics: Vec<CriticNet>,
    pub critic_targets: Vec<CriticNet>,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    counters: AgentCounters,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(
        cfg: AgentConfig,
        obs_dim: usize,
        action_dim: usize,
        action_scale: f64,
        rng: &mut R,
    ) -> Result<Self> {
        cfg.validate()?;
        let actor_cfg = ActorConfig {
            obs_dim,
            action_dim,
            hidden: cfg.actor_hidden.clone(),
            timesteps: cfg.timesteps,
            neuron: cfg.neuron,
            neuron_params: cfg.neuron_params,
            action_scale,
        };
        let actor = ActorNet::new(actor_cfg, cfg.estimator, rng)?;
        let critics: Vec<CriticNet> =
            (0..cfg.num_critics()).map(|_| CriticNet::new(obs_dim, action_dim, &cfg.critic_hidden, rng)).collect();
        Ok(Self {
            actor_target: actor.clone(),
            critic_targets: critics.clone(),
            actor_opt: Adam::new(cfg.actor_lr),
            critic_opts: critics.iter().map(|_| Adam::new(cfg.critic_lr)).collect(),
            actor,
            critics,
            action_scale,
            counters: AgentCounters::default(),
            cfg,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.cfg
    }

    pub fn action_scale(&self) -> f64 {
        self.action_scale
    }

    pub fn counters(&self) -> AgentCounters {
        self.counters
    }

    /// Uniform random action, used during warmup.
    pub fn random_action<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let a = self.action_scale;
        (0..self.actor.config().action_dim).map(|_| rng.random_range(-a..=a)).collect()
    }

    /// Policy action from the moving statistics, plus clipped Gaussian noise when exploring.
    pub fn select_action<R: Rng + ?Sized>(&self, obs: &[f64], explore: bool, rng: &mut R) -> Result<Vec<f64>> {
        let x = Array2::from_shape_vec((1, obs.len()), obs.to_vec()).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut a = self.actor.act(x.view(), StatsSource::Moving)?.row(0).to_vec();
        let scale = self.action_scale;
        if explore && self.cfg.exploration_noise > 0.0 {
            let noise = Normal::new(0.0, self.cfg.exploration_noise * scale).map_err(|e| Error::Numeric(e.to_string()))?;
            for v in &mut a {
                *v += noise.sample(rng);
            }
        }
        a.iter_mut().for_each(|v| *v = v.clamp(-scale, scale));
        Ok(a)
    }

    /// One gradient update from a uniformly sampled replay batch.
    pub fn update_step<R: Rng + ?Sized>(&mut self, buffer: &ReplayBuffer, rng: &mut R) -> Result<UpdateInfo> {
        let n = self.cfg.batch_size;
        let batch = buffer.sample(rng, n)?;
        let scale = self.action_scale;

        let mut next = self.actor_target.act(batch.next_states.view(), StatsSource::Batch)?;
        if self.cfg.algorithm == Algorithm::Td3 && self.cfg.target_noise > 0.0 {
            let noise = Normal::new(0.0, self.cfg.target_noise * scale).map_err(|e| Error::Numeric(e.to_string()))?;
            let clip = self.cfg.noise_clip * scale;
            for v in next.iter_mut() {
                let e: f64 = noise.sample(rng);
                *v = (*v + e.clamp(-clip, clip)).clamp(-scale, scale);
            }
        }
        let mut q_next: Option<Array1<f64>> = None;
        for target in &self.critic_targets {
            let q = target.q_values(batch.next_states.view(), next.view())?;
            q_next = Some(match q_next {
                None => q,
                Some(prev) => Zip::from(&prev).and(&q).map_collect(|a, b| a.min(*b)),
            });
        }
        let q_next = q_next.expect("at least one critic");
        let gamma = self.cfg.gamma;
        let y = Zip::from(&batch.rewards)
            .and(&batch.dones)
            .and(&q_next)
            .map_collect(|r, d, q| r + gamma * (1.0 - d) * q);

        let mut critic_loss = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(&mut self.critic_opts) {
            let (q, cache) = critic.forward(batch.states.view(), batch.actions.view())?;
            let diff = &q - &y;
            critic_loss += diff.mapv(|d| d * d).mean().unwrap_or(0.0);
            let grad_q = diff.mapv(|d| 2.0 * d / n as f64);
            let (grads, _) = critic.backward(&cache, grad_q.view())?;
            opt.step(critic, &grads)?;
        }

        let update_index = self.counters.updates;
        self.counters.updates += 1;
        let actor_turn = match self.cfg.algorithm {
            Algorithm::Ddpg => true,
            Algorithm::Td3 => update_index.is_multiple_of(self.cfg.policy_delay as u64),
        };
        let mut actor_loss = None;
        if actor_turn {
            let (a, stats) = self.actor.forward_train(batch.states.view())?;
            let (q, cache) = self.critics[0].forward(batch.states.view(), a.view())?;
            actor_loss = Some(-q.mean().unwrap_or(0.0));
            let grad_q = Array1::from_elem(n, -1.0 / n as f64);
            let (_, grad_a) = self.critics[0].backward(&cache, grad_q.view())?;
            let grads = self.actor.backward(grad_a.view())?;
            self.actor_opt.step(&mut self.actor, &grads)?;
            self.actor.update_estimators(&stats)?;
            self.counters.actor_updates += 1;

            let tau = self.cfg.tau;
            soft_update(&mut self.actor_target, &self.actor, tau);
            for (t, c) in self.critic_targets.iter_mut().zip(&self.critics) {
                soft_update(t, c, tau);
            }
        }

        let recalibrated = self.cfg.estimator.recalibration_due(self.counters.updates);
        if recalibrated {
            let per_layer = self.collect_calibration_stats(buffer, rng, self.cfg.estimator.m_cal, n)?;
            self.actor.recalibrate(&per_layer)?;
            self.counters.recalibrations += 1;
        }

        Ok(UpdateInfo { critic_loss, actor_loss, mean_target: y.mean().unwrap_or(0.0), recalibrated })
    }

    /// `m` batch-statistic forwards of the actor over replay states. Returns
    /// one list of `m` statistics per hidden layer. Touches no parameters or estimators.
    pub fn collect_calibration_stats<R: Rng + ?Sized>(
        &mut self,
        buffer: &ReplayBuffer,
        rng: &mut R,
        m: usize,
        n: usize,
    ) -> Result<Vec<Vec<BatchStats>>> {
        let mut per_layer: Vec<Vec<BatchStats>> = vec![Vec::with_capacity(m); self.actor.layers.len()];
        for _ in 0..m {
            let states = buffer.sample_states(rng, n)?;
            let (_, stats) = self.actor.forward_batch(states.view())?;
            for (list, bs) in per_layer.iter_mut().zip(stats) {
                list.push(bs);
            }
            self.counters.calibration_forwards += 1;
        }
        Ok(per_layer)
    }

    pub fn state(&self) -> AgentState {
        let ac = self.actor.config();
        AgentState {
            cfg: self.cfg.clone(),
            obs_dim: ac.obs_dim,
            action_dim: ac.action_dim,
            action_scale: self.action_scale,
            actor: self.actor.weights(),
            actor_target: self.actor_target.weights(),
            critics: self.critics.clone(),
            critic_targets: self.critic_targets.clone(),
            actor_opt: self.actor_opt.clone(),
            critic_opts: self.critic_opts.clone(),
            counters: self.counters,
        }
    }

    pub fn from_state(s: AgentState) -> Result<Self> {
        // Random initial weights are overwritten below; the seed is irrelevant.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut agent = Self::new(s.cfg, s.obs_dim, s.action_dim, s.action_scale, &mut rng)?;
        agent.actor.load_weights(s.actor)?;
        agent.actor_target.load_weights(s.actor_target)?;
        let k = agent.critics.len();
        if s.critics.len() != k || s.critic_targets.len() != k || s.critic_opts.len() != k {
            return Err(Error::dim(k, s.critics.len()));
        }
        for (mine, theirs) in agent.critics.iter().zip(&s.critics).chain(agent.critic_targets.iter().zip(&s.critic_targets)) {
            let shapes = |c: &CriticNet| c.layers().iter().map(|l| l.w.dim()).collect::<Vec<_>>();
            if shapes(mine) != shapes(theirs) {
                return Err(Error::Format("critic shapes do not match the agent configuration".into()));
            }
        }
        agent.critics = s.critics;
        agent.critic_targets = s.critic_targets;
        agent.actor_opt = s.actor_opt;
        agent.critic_opts = s.critic_opts;
        agent.counters = s.counters;
        Ok(agent)
    }
}
