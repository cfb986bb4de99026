use std::hint::black_box;

use carebn::rl::{Agent, AgentConfig, ReplayBuffer, Transition};
use carebn::snn::{ActorConfig, ActorNet, StatsSource};
use carebn::{EstimatorConfig, EstimatorMode};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(rng: &mut ChaCha8Rng, rows: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, 3), || rng.random_range(-1.0..1.0))
}

fn actor(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut g = c.benchmark_group("actor");
    g.sample_size(20);
    for width in [64, 256] {
        let cfg = ActorConfig { hidden: vec![width, width], ..ActorConfig::new(3, 1) };
        let mut net = ActorNet::new(cfg, EstimatorConfig::with_mode(EstimatorMode::CaRe), &mut rng).unwrap();
        let x = obs(&mut rng, 256);
        let (_, stats) = net.forward_train(x.view()).unwrap();
        net.update_estimators(&stats).unwrap();
        let one = obs(&mut rng, 1);
        g.bench_with_input(BenchmarkId::new("act_moving", width), &one, |b, o| {
            b.iter(|| net.act(black_box(o.view()), StatsSource::Moving).unwrap())
        });
        let fused = net.fused().unwrap();
        g.bench_with_input(BenchmarkId::new("act_fused", width), &one, |b, o| {
            b.iter(|| fused.act(black_box(o.view())).unwrap())
        });
        let grad = Array2::from_elem((256, 1), 1.0 / 256.0);
        g.bench_with_input(BenchmarkId::new("train_fwd_bwd_256", width), &x, |b, x| {
            b.iter(|| {
                net.forward_train(black_box(x.view())).unwrap();
                net.backward(grad.view()).unwrap()
            })
        });
    }
    g.finish();
}

fn update_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut g = c.benchmark_group("td3_update");
    g.sample_size(10);
    for width in [64, 256] {
        let cfg = AgentConfig { actor_hidden: vec![width, width], critic_hidden: vec![width, width], ..Default::default() };
        let mut agent = Agent::new(cfg, 3, 1, 2.0, &mut rng).unwrap();
        let mut buffer = ReplayBuffer::new(10_000, 3, 1);
        for _ in 0..2_000 {
            let s: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let next: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = vec![rng.random_range(-2.0..2.0)];
            buffer.push(Transition { state: s, action: a, reward: -1.0, next_state: next, done: false }).unwrap();
        }
        g.bench_function(BenchmarkId::from_parameter(width), |b| b.iter(|| agent.update_step(&buffer, &mut rng).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, actor, update_step);
criterion_main!(benches);
