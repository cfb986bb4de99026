//! Synthetic Gaussian activation streams with known, drifting statistics.
//!
//! Batch `i` of a stream is drawn from `N(μ*_i, σ*_i²)` per channel. Every
//! batch is generated from its own ChaCha stream, so batches can be produced
//! in any order and are bitwise reproducible from the seed.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::BatchStats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regime {
    Static,
    /// `μ* = base_mean + amplitude·sin(2πi/period + phase_c)`, and likewise
    /// `σ*² = base_var·(1 + var_amplitude·sin(…))`.
    Sinusoidal { amplitude: f64, period: f64, var_amplitude: f64 },
    /// Mean jumps by `jump` at iteration `at`.
    Step { at: usize, jump: f64 },
    /// Mean follows a Gaussian random walk with per-iteration std `step_std`.
    RandomWalk { step_std: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub regime: Regime,
    #[serde(default = "one")]
    pub channels: usize,
    pub batch_size: usize,
    pub iterations: usize,
    #[serde(default)]
    pub base_mean: f64,
    #[serde(default = "one_f")]
    pub base_var: f64,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

impl StreamConfig {
    pub fn new(regime: Regime, batch_size: usize, iterations: usize) -> Self {
        Self { regime, channels: 1, batch_size, iterations, base_mean: 0.0, base_var: 1.0 }
    }

    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if self.channels == 0 {
            out.push(format!("{prefix}channels must be positive"));
        }
        if self.batch_size < 2 {
            out.push(format!("{prefix}batch_size must be >= 2"));
        }
        if !(self.base_var > 0.0) {
            out.push(format!("{prefix}base_var must be positive"));
        }
        match self.regime {
            Regime::Sinusoidal { period, var_amplitude, .. } => {
                if !(period > 0.0) {
                    out.push(format!("{prefix}regime.period must be positive"));
                }
                if !(var_amplitude.abs() < 1.0) {
                    out.push(format!("{prefix}regime.var_amplitude must lie in (-1, 1)"));
                }
            }
            Regime::RandomWalk { step_std } if !(step_std >= 0.0) => {
                out.push(format!("{prefix}regime.step_std must be nonnegative"));
            }
            _ => {}
        }
        out
    }
}

/// Ground truth for one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DriftStream {
    cfg: StreamConfig,
    seed: u64,
    walk: Vec<f64>,
}

const CALIBRATION_STREAMS: u64 = 1 << 40;

impl DriftStream {
    pub fn new(cfg: StreamConfig, seed: u64) -> Result<Self> {
        let v = cfg.violations("stream.");
        if !v.is_empty() {
            return Err(Error::Validation(v));
        }
        let walk = match cfg.regime {
            Regime::RandomWalk { step_std } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut pos = vec![0.0; cfg.channels];
                let mut walk = Vec::with_capacity(cfg.iterations * cfg.channels);
                for _ in 0..cfg.iterations {
                    walk.extend_from_slice(&pos);
                    for p in &mut pos {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *p += step_std * z;
                    }
                }
                walk
            }
            _ => Vec::new(),
        };
        Ok(Self { cfg, seed, walk })
    }

    pub fn config(&self) -> &StreamConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.cfg.iterations
    }

    pub fn is_empty(&self) -> bool {
        self.cfg.iterations == 0
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.cfg.iterations {
            return Err(Error::InvalidArgument(format!(
                "iteration {i} is outside the stream horizon {}",
                self.cfg.iterations
            )));
        }
        Ok(())
    }

    pub fn truth(&self, i: usize) -> Result<Truth> {
        self.check(i)?;
        let c = &self.cfg;
        let mut mean = vec![c.base_mean; c.channels];
        let mut var = vec![c.base_var; c.channels];
        match c.regime {
            Regime::Static => {}
            Regime::Sinusoidal { amplitude, period, var_amplitude } => {
                for ch in 0..c.channels {
                    let phase = 2.0 * PI * ch as f64 / c.channels as f64;
                    let sn = (2.0 * PI * i as f64 / period + phase).sin();
                    mean[ch] += amplitude * sn;
                    var[ch] *= 1.0 + var_amplitude * sn;
                }
            }
            Regime::Step { at, jump } => {
                if i >= at {
                    mean.iter_mut().for_each(|m| *m += jump);
                }
            }
            Regime::RandomWalk { .. } => {
                let off = i * c.channels;
                for (m, w) in mean.iter_mut().zip(&self.walk[off..off + c.channels]) {
                    *m += w;
                }
            }
        }
        Ok(Truth { mean, var })
    }

    fn draw(&self, truth: &Truth, stream: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        let sd: Vec<f64> = truth.var.iter().map(|v| v.sqrt()).collect();
        let c = self.cfg.channels;
        Array2::from_shape_fn((self.cfg.batch_size, c), |(_, ch)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            truth.mean[ch] + sd[ch] * z
        })
    }

    /// Samples (batch × channels) for iteration `i` plus the ground truth.
    pub fn batch(&self, i: usize) -> Result<(Array2<f64>, Truth)> {
        let truth = self.truth(i)?;
        let x = self.draw(&truth, i as u64 + 1);
        Ok((x, truth))
    }

    /// `m` fresh batches from the distribution at iteration `i`, drawn from
    /// streams disjoint from [`batch`](Self::batch). Stand-in for replay-buffer
    /// calibration batches.
    pub fn calibration_batches(&self, i: usize, m: usize) -> Result<Vec<BatchStats>> {
        let truth = self.truth(i)?;
        (0..m)
            .map(|j| {
                let stream = CALIBRATION_STREAMS + (i as u64) * 4096 + j as u64;
                BatchStats::from_rows(self.draw(&truth, stream).view())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinusoid_truth_matches_closed_form() {
        let regime = Regime::Sinusoidal { amplitude: 1.5, period: 40.0, var_amplitude: 0.0 };
        let s = DriftStream::new(StreamConfig::new(regime, 8, 100), 1).unwrap();
        for i in [0, 7, 10, 33, 99] {
            let t = s.truth(i).unwrap();
            assert_eq!(t.mean[0], 1.5 * (2.0 * PI * i as f64 / 40.0).sin());
            assert_eq!(t.var[0], 1.0);
        }
    }

    #[test]
    fn step_truth_jumps() {
        let s = DriftStream::new(StreamConfig::new(Regime::Step { at: 50, jump: 3.0 }, 8, 100), 1).unwrap();
        let before = s.truth(49).unwrap().mean[0];
        let after = s.truth(50).unwrap().mean[0];
        assert_eq!(after - before, 3.0);
    }

    #[test]
    fn out_of_range_iteration() {
        let s = DriftStream::new(StreamConfig::new(Regime::Static, 8, 10), 1).unwrap();
        assert!(matches!(s.batch(10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn batches_are_reproducible_and_random_access() {
        let cfg = StreamConfig::new(Regime::RandomWalk { step_std: 0.1 }, 16, 30);
        let a = DriftStream::new(cfg.clone(), 9).unwrap();
        let b = DriftStream::new(cfg, 9).unwrap();
        let late = b.batch(20).unwrap();
        for i in 0..30 {
            assert_eq!(a.batch(i).unwrap(), b.batch(i).unwrap());
        }
        assert_eq!(a.batch(20).unwrap(), late);
        assert_ne!(a.batch(3).unwrap().0, a.batch(4).unwrap().0);
    }

    #[test]
    fn validation_rejects_bad_stream() {
        let mut cfg = StreamConfig::new(Regime::Static, 1, 10);
        cfg.base_var = 0.0;
        match DriftStream::new(cfg, 0) {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
