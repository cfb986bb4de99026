//! Runs estimators over a [`DriftStream`] and records how well they track the
//! ground-truth mean and variance.

use serde::{Deserialize, Serialize};

use super::drift::DriftStream;
use crate::error::Result;
use crate::stats::{BatchStats, EstimatorConfig, MovingStats};

/// Something that can be tracked against a stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tracker {
    Estimator(EstimatorConfig),
    /// Reports the ground truth; zero error by construction.
    Oracle,
}

impl Tracker {
    pub fn label(&self) -> String {
        match self {
            Tracker::Oracle => "oracle".to_string(),
            Tracker::Estimator(cfg) if cfg.mode.adaptive() => cfg.mode.to_string(),
            Tracker::Estimator(cfg) => format!("{}@{}", cfg.mode, cfg.alpha),
        }
    }
}

/// One row of plot data, for channel 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iteration: usize,
    pub true_mu: f64,
    pub est_mu: f64,
    pub true_var: f64,
    pub est_var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub label: String,
    /// Per-iteration squared mean error, averaged over channels.
    pub mu_sq_err: Vec<f64>,
    /// Per-iteration squared variance error, averaged over channels.
    pub var_sq_err: Vec<f64>,
    /// Iterations at which recalibration fired.
    pub recalibrations: Vec<usize>,
    pub trace: Vec<TracePoint>,
}

impl TrackingResult {
    pub fn mse_mu(&self, burn_in: usize) -> f64 {
        mean_from(&self.mu_sq_err, burn_in)
    }

    pub fn mse_var(&self, burn_in: usize) -> f64 {
        mean_from(&self.var_sq_err, burn_in)
    }
}

fn mean_from(v: &[f64], burn_in: usize) -> f64 {
    let tail = &v[burn_in.min(v.len())..];
    if tail.is_empty() {
        return 0.0;
    }
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Runs every tracker over the whole stream. The error at iteration `i` is
/// measured after the estimator has consumed batch `i`. Estimator steps are
/// numbered from 1, so recalibration fires after batches `t_cal−1`, `2·t_cal−1`, …;
/// calibration batches are fresh draws from the current true distribution.
pub fn tracking_benchmark(trackers: &[Tracker], stream: &DriftStream) -> Result<Vec<TrackingResult>> {
    let channels = stream.config().channels;
    let mut states: Vec<MovingStats> = trackers.iter().map(|_| MovingStats::new(channels)).collect();
    let mut results: Vec<TrackingResult> = trackers
        .iter()
        .map(|t| TrackingResult {
            label: t.label(),
            mu_sq_err: Vec::with_capacity(stream.len()),
            var_sq_err: Vec::with_capacity(stream.len()),
            recalibrations: Vec::new(),
            trace: Vec::with_capacity(stream.len()),
        })
        .collect();

    for i in 0..stream.len() {
        let (x, truth) = stream.batch(i)?;
        let bs = BatchStats::from_rows(x.view())?;
        let step_index = i as u64 + 1;
        for ((tracker, state), res) in trackers.iter().zip(&mut states).zip(&mut results) {
            let (mu, var): (Vec<f64>, Vec<f64>) = match tracker {
                Tracker::Oracle => (truth.mean.clone(), truth.var.clone()),
                Tracker::Estimator(cfg) => {
                    let mut sampler = |m: usize| stream.calibration_batches(i, m);
                    let sampler: Option<&mut dyn FnMut(usize) -> Result<Vec<BatchStats>>> =
                        if cfg.mode.recalibrates() { Some(&mut sampler) } else { None };
                    state.step(&bs, cfg, step_index, sampler)?;
                    if cfg.recalibration_due(step_index) {
                        res.recalibrations.push(i);
                    }
                    (state.mu_hat().to_vec(), state.var_hat().to_vec())
                }
            };
            let c = channels as f64;
            let e_mu = mu.iter().zip(&truth.mean).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / c;
            let e_var = var.iter().zip(&truth.var).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / c;
            res.mu_sq_err.push(e_mu);
            res.var_sq_err.push(e_var);
            res.trace.push(TracePoint {
                iteration: i,
                true_mu: truth.mean[0],
                est_mu: mu[0],
                true_var: truth.var[0],
                est_var: var[0],
            });
        }
    }
    Ok(results)
}
