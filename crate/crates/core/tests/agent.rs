mod common;

use carebn::envs::PendulumConfig;
use carebn::rl::{train, Agent, AgentConfig, Algorithm, ReplayBuffer, Trainer, TrainerState, Transition};
use carebn::snn::ParamSet;
use carebn::stats::recalibrate;
use carebn::{Error, EstimatorConfig, EstimatorMode};
use common::brute_stats;
use ndarray::{concatenate, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_cfg(mode: EstimatorMode) -> AgentConfig {
    AgentConfig {
        batch_size: 32,
        warmup_steps: 64,
        total_steps: 600,
        eval_interval: 200,
        eval_episodes: 2,
        actor_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        estimator: EstimatorConfig { mode, alpha: 0.1, t_cal: 50, m_cal: 5 },
        ..AgentConfig::default()
    }
}

fn short_env() -> PendulumConfig {
    PendulumConfig { episode_len: 50, ..PendulumConfig::default() }
}

fn filled_buffer(rng: &mut ChaCha8Rng, n: usize, reward: f64) -> ReplayBuffer {
    let mut b = ReplayBuffer::new(10_000, 3, 1);
    for _ in 0..n {
        let state: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let next_state: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = vec![rng.random_range(-2.0..2.0)];
        b.push(Transition { state, action, reward, next_state, done: false }).unwrap();
    }
    b
}

fn norm_counts(agent: &Agent) -> (u64, u64, u64) {
    agent.actor.layers.iter().fold((0, 0, 0), |acc, l| {
        let c = l.norm.counters();
        (acc.0 + c.train.get(), acc.1 + c.infer.get(), acc.2 + c.batch_only.get())
    })
}

#[test]
fn statistic_routing_follows_the_interaction_update_split() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut agent = Agent::new(small_cfg(EstimatorMode::CaRe), 3, 1, 2.0, &mut rng).unwrap();
    let buffer = filled_buffer(&mut rng, 200, -1.0);
    assert!(matches!(agent.select_action(&[0.0, 1.0, 0.0], false, &mut rng), Err(Error::State(_))));

    agent.update_step(&buffer, &mut rng).unwrap();
    let (train, infer, batch) = norm_counts(&agent);
    assert_eq!((train, infer, batch), (2, 0, 0), "update uses only training forwards");

    for _ in 0..10 {
        agent.select_action(&[0.3, -0.2, 0.5], true, &mut rng).unwrap();
    }
    let (train2, infer2, batch2) = norm_counts(&agent);
    assert_eq!((train2 - train, batch2 - batch), (0, 0), "action selection never normalizes with batch statistics");
    assert_eq!(infer2 - infer, 20);

    for _ in 0..60 {
        agent.update_step(&buffer, &mut rng).unwrap();
    }
    let (_, infer3, _) = norm_counts(&agent);
    assert_eq!(infer3, infer2, "updates never read the moving statistics");
}

#[test]
fn recalibration_overhead_is_bounded() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = small_cfg(EstimatorMode::CaRe);
    let (m, t) = (cfg.estimator.m_cal as f64, cfg.estimator.t_cal as f64);
    let mut agent = Agent::new(cfg, 3, 1, 2.0, &mut rng).unwrap();
    let buffer = filled_buffer(&mut rng, 200, -1.0);
    for _ in 0..500 {
        agent.update_step(&buffer, &mut rng).unwrap();
    }
    let c = agent.counters();
    assert_eq!(c.recalibrations, 10);
    assert!(c.calibration_forwards as f64 / c.updates as f64 <= m / t);
    let (_, _, batch_only) = norm_counts(&agent);
    assert_eq!(batch_only, 2 * c.calibration_forwards);
}

#[test]
fn hard_target_copy_with_unit_tau() {
    for algorithm in [Algorithm::Ddpg, Algorithm::Td3] {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = AgentConfig { tau: 1.0, algorithm, ..small_cfg(EstimatorMode::Ema) };
        let mut agent = Agent::new(cfg, 3, 1, 2.0, &mut rng).unwrap();
        let buffer = filled_buffer(&mut rng, 100, -1.0);
        agent.update_step(&buffer, &mut rng).unwrap();
        assert_eq!(agent.actor_target.flatten(), agent.actor.flatten());
        for (t, c) in agent.critic_targets.iter().zip(&agent.critics) {
            assert_eq!(t.flatten(), c.flatten());
        }
    }
}

#[test]
fn myopic_targets_equal_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = AgentConfig { gamma: 1e-300, ..small_cfg(EstimatorMode::Ca) };
    let mut agent = Agent::new(cfg, 3, 1, 2.0, &mut rng).unwrap();
    let buffer = filled_buffer(&mut rng, 100, 1.0);
    let info = agent.update_step(&buffer, &mut rng).unwrap();
    assert_eq!(info.mean_target, 1.0);
}

#[test]
fn zero_discount_is_rejected_by_validation() {
    let cfg = AgentConfig { gamma: 0.0, ..small_cfg(EstimatorMode::Ca) };
    assert!(matches!(cfg.validate(), Err(Error::Validation(_))));
}

#[test]
fn estimator_mode_never_changes_parameter_updates() {
    let run = |mode| {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut agent = Agent::new(small_cfg(mode), 3, 1, 2.0, &mut rng).unwrap();
        let buffer = filled_buffer(&mut rng, 300, -0.5);
        let mut snapshots = Vec::new();
        for _ in 0..6 {
            agent.update_step(&buffer, &mut rng).unwrap();
            let mut all = agent.actor.flatten();
            for c in &agent.critics {
                all.extend(c.flatten());
            }
            snapshots.push(all);
        }
        (snapshots, agent.actor.layers[0].norm.moving().mu_hat().to_vec())
    };
    let (ema, ema_mu) = run(EstimatorMode::Ema);
    let (ca, ca_mu) = run(EstimatorMode::Ca);
    assert_eq!(ema, ca, "parameters must match bitwise");
    assert_ne!(ema_mu, ca_mu, "the estimators themselves should differ");
}

#[test]
fn calibration_collection_is_pure_and_pools_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut agent = Agent::new(small_cfg(EstimatorMode::CaRe), 3, 1, 2.0, &mut rng).unwrap();
    let buffer = filled_buffer(&mut rng, 300, -0.5);
    agent.update_step(&buffer, &mut rng).unwrap();
    let before = (agent.actor.flatten(), agent.actor.layers[0].norm.moving().clone());

    let (m, n) = (4, 32);
    let mut replay = rng.clone();
    let per_layer = agent.collect_calibration_stats(&buffer, &mut rng, m, n).unwrap();
    assert_eq!(agent.actor.flatten(), before.0);
    assert_eq!(agent.actor.layers[0].norm.moving(), &before.1);

    let states: Vec<_> = (0..m).map(|_| buffer.sample_states(&mut replay, n).unwrap()).collect();
    let currents: Vec<_> = states.iter().map(|s| agent.actor.first_layer_currents(s.view()).unwrap()).collect();
    let pooled = concatenate(Axis(0), &currents.iter().map(|c| c.view()).collect::<Vec<_>>()).unwrap();
    let (mu, var) = recalibrate(&per_layer[0]).unwrap();
    for ch in 0..pooled.ncols() {
        let col: Vec<f64> = pooled.column(ch).to_vec();
        let (bm, bv) = brute_stats(&col);
        assert!((mu[ch] - bm).abs() <= 1e-8 * (1.0 + bm.abs()));
        assert!((var[ch] - bv).abs() <= 1e-8 * (1.0 + bv));
    }

    let single = agent.collect_calibration_stats(&buffer, &mut rng, 1, n).unwrap();
    agent.actor.recalibrate(&single).unwrap();
    for (layer, stats) in agent.actor.layers.iter().zip(&single) {
        let m = layer.norm.moving();
        for c in 0..m.mu_hat().len() {
            assert!((m.mu_hat()[c] - stats[0].mean()[c]).abs() <= 1e-12 * (1.0 + stats[0].mean()[c].abs()));
            assert!((m.var_hat()[c] - stats[0].var()[c]).abs() <= 1e-12 * (1.0 + stats[0].mean()[c].powi(2)));
        }
    }
}

#[test]
fn insufficient_buffer_is_a_precondition_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agent = Agent::new(small_cfg(EstimatorMode::CaRe), 3, 1, 2.0, &mut rng).unwrap();
    let buffer = filled_buffer(&mut rng, 10, -1.0);
    assert!(matches!(agent.update_step(&buffer, &mut rng), Err(Error::Precondition(_))));
    assert!(matches!(agent.collect_calibration_stats(&buffer, &mut rng, 2, 32), Err(Error::Precondition(_))));
}

#[test]
fn actions_are_deterministic_without_noise_and_bounded_with_it() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = AgentConfig { exploration_noise: 5.0, ..small_cfg(EstimatorMode::CaRe) };
    let mut agent = Agent::new(cfg, 3, 1, 2.0, &mut rng).unwrap();
    let buffer = filled_buffer(&mut rng, 100, -1.0);
    agent.update_step(&buffer, &mut rng).unwrap();
    let o = [0.1, 0.9, -0.3];
    let a = agent.select_action(&o, false, &mut rng).unwrap();
    let b = agent.select_action(&o, false, &mut rng).unwrap();
    assert_eq!(a, b);
    for _ in 0..1000 {
        let a = agent.select_action(&o, true, &mut rng).unwrap();
        assert!(a[0].abs() <= 2.0);
    }
}

/// Upper 1% point of χ²(k) by the Wilson–Hilferty approximation.
fn chi2_upper_1pct(k: f64) -> f64 {
    let z = 2.326_347_874;
    k * (1.0 - 2.0 / (9.0 * k) + z * (2.0 / (9.0 * k)).sqrt()).powi(3)
}

#[test]
fn replay_sampling_is_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let buffer = filled_buffer(&mut rng, 100, 0.0);
    let mut counts = vec![0usize; 100];
    for _ in 0..1000 {
        for i in buffer.sample_indices(&mut rng, 100).unwrap() {
            counts[i] += 1;
        }
    }
    let expected = 100_000.0 / 100.0;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < chi2_upper_1pct(99.0), "χ² = {chi2}");
}

#[test]
fn ring_buffer_never_exceeds_capacity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut b = ReplayBuffer::new(50, 3, 1);
    for k in 0..173 {
        b.push(Transition { state: vec![0.0; 3], action: vec![0.0], reward: k as f64, next_state: vec![0.0; 3], done: false })
            .unwrap();
        assert!(b.len() <= 50);
    }
    assert!(b.sample(&mut rng, 50).is_ok());
}

#[test]
fn zero_steps_give_an_empty_curve() {
    let cfg = AgentConfig { total_steps: 0, ..small_cfg(EstimatorMode::CaRe) };
    assert!(train(cfg, short_env(), 1).unwrap().is_empty());
}

#[test]
fn training_is_a_pure_function_of_seed() {
    let a = train(small_cfg(EstimatorMode::CaRe), short_env(), 11).unwrap();
    let b = train(small_cfg(EstimatorMode::CaRe), short_env(), 11).unwrap();
    assert_eq!(a.len(), 3);
    assert_eq!(a, b);
    let c = train(small_cfg(EstimatorMode::CaRe), short_env(), 12).unwrap();
    assert_ne!(a, c);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let mut full = Trainer::new(small_cfg(EstimatorMode::CaRe), short_env(), 13).unwrap();
    full.run().unwrap();

    let mut first = Trainer::new(small_cfg(EstimatorMode::CaRe), short_env(), 13).unwrap();
    first.run_until(333).unwrap();
    let json = serde_json::to_string(&first.state()).unwrap();
    drop(first);
    let state: TrainerState = serde_json::from_str(&json).unwrap();
    let mut resumed = Trainer::from_state(state).unwrap();
    resumed.run().unwrap();

    assert_eq!(resumed.curve(), full.curve());
    assert_eq!(resumed.agent().actor.flatten(), full.agent().actor.flatten());
    assert_eq!(resumed.agent().state().actor.layers[1].moving, full.agent().state().actor.layers[1].moving);
    assert_eq!(resumed.agent().counters(), full.agent().counters());
}
