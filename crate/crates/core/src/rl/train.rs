//! Environment loop: warmup, interaction, updates and periodic evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{Agent, AgentConfig, AgentState};
use super::buffer::{ReplayBuffer, Transition};
use crate::envs::{PendulumConfig, PendulumEnv};
use crate::error::{Error, Result};

/// Evaluation episodes draw their initial states from streams far away from
/// the training stream, one per evaluation point.
const EVAL_STREAM_BASE: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub mean_return: f64,
}

/// Everything needed to continue a run bit-for-bit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerState {
    pub seed: u64,
    pub env_cfg: PendulumConfig,
    pub agent: AgentState,
    pub env: PendulumEnv,
    pub buffer: ReplayBuffer,
    pub rng: ChaCha8Rng,
    pub step: u64,
    pub obs: [f64; 3],
    pub curve: Vec<EvalPoint>,
}

#[derive(Debug, Clone)]
pub struct Trainer {
    seed: u64,
    env_cfg: PendulumConfig,
    agent: Agent,
    env: PendulumEnv,
    buffer: ReplayBuffer,
    rng: ChaCha8Rng,
    step: u64,
    obs: [f64; 3],
    curve: Vec<EvalPoint>,
}

impl Trainer {
    pub fn new(cfg: AgentConfig, env_cfg: PendulumConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut env = PendulumEnv::new(env_cfg);
        let agent = Agent::new(cfg, PendulumEnv::OBS_DIM, PendulumEnv::ACTION_DIM, env_cfg.max_torque, &mut rng)?;
        let obs = env.reset(&mut rng);
        let buffer = ReplayBuffer::new(agent.config().buffer_capacity, PendulumEnv::OBS_DIM, PendulumEnv::ACTION_DIM);
        Ok(Self { seed, env_cfg, agent, env, buffer, rng, step: 0, obs, curve: Vec::new() })
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn curve(&self) -> &[EvalPoint] {
        &self.curve
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.agent.config().total_steps
    }

    /// One environment step, followed by one update once warmup has filled the
    /// buffer, followed by an evaluation when the step count hits the interval.
    pub fn step_once(&mut self) -> Result<()> {
        let cfg = self.agent.config();
        let (warmup, interval) = (cfg.warmup_steps, cfg.eval_interval);
        let action = if self.step < warmup {
            self.agent.random_action(&mut self.rng)
        } else {
            self.agent.select_action(&self.obs, true, &mut self.rng)?
        };
        let res = self.env.step(action[0]);
        self.buffer.push(Transition {
            state: self.obs.to_vec(),
            action,
            reward: res.reward,
            next_state: res.obs.to_vec(),
            done: res.terminated,
        })?;
        self.obs = if res.terminated || res.truncated { self.env.reset(&mut self.rng) } else { res.obs };
        self.step += 1;

        if self.step >= warmup {
            self.agent.update_step(&self.buffer, &mut self.rng)?;
        }
        if self.step.is_multiple_of(interval) {
            self.evaluate_point()?;
        }
        Ok(())
    }

    /// Records an evaluation point. Skipped while the moving statistics are
    /// still uninitialized, since the policy cannot act without them.
    fn evaluate_point(&mut self) -> Result<()> {
        if !self.agent.actor.estimators_initialized() {
            return Ok(());
        }
        let k = self.step / self.agent.config().eval_interval;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(EVAL_STREAM_BASE + k);
        let mean_return = evaluate(&self.agent, self.env_cfg, self.agent.config().eval_episodes, &mut rng)?;
        self.curve.push(EvalPoint { step: self.step, mean_return });
        Ok(())
    }

    /// Runs until `step_count() == min(total_steps, until)`.
    pub fn run_until(&mut self, until: u64) -> Result<()> {
        let end = until.min(self.agent.config().total_steps);
        while self.step < end {
            self.step_once()?;
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<Vec<EvalPoint>> {
        self.run_until(u64::MAX)?;
        Ok(self.curve.clone())
    }

    pub fn state(&self) -> TrainerState {
        TrainerState {
            seed: self.seed,
            env_cfg: self.env_cfg,
            agent: self.agent.state(),
            env: self.env.clone(),
            buffer: self.buffer.clone(),
            rng: self.rng.clone(),
            step: self.step,
            obs: self.obs,
            curve: self.curve.clone(),
        }
    }

    pub fn from_state(s: TrainerState) -> Result<Self> {
        let agent = Agent::from_state(s.agent)?;
        if s.buffer.capacity() != agent.config().buffer_capacity {
            return Err(Error::Format("replay capacity does not match the agent configuration".into()));
        }
        Ok(Self {
            seed: s.seed,
            env_cfg: s.env_cfg,
            agent,
            env: s.env,
            buffer: s.buffer,
            rng: s.rng,
            step: s.step,
            obs: s.obs,
            curve: s.curve,
        })
    }
}

/// Mean undiscounted return of `episodes` noise-free episodes.
pub fn evaluate<R: Rng + ?Sized>(agent: &Agent, env_cfg: PendulumConfig, episodes: usize, rng: &mut R) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut env = PendulumEnv::new(env_cfg);
        let mut obs = env.reset(rng);
        loop {
            let a = agent.select_action(&obs, false, rng)?;
            let res = env.step(a[0]);
            total += res.reward;
            obs = res.obs;
            if res.terminated || res.truncated {
                break;
            }
        }
    }
    Ok(total / episodes as f64)
}

/// Trains from scratch and returns the learning curve.
pub fn train(cfg: AgentConfig, env_cfg: PendulumConfig, seed: u64) -> Result<Vec<EvalPoint>> {
    Trainer::new(cfg, env_cfg, seed)?.run()
}
