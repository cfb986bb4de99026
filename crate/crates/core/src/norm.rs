//! Batch normalization with separate statistic sources for training and
//! inference.
//!
//! `forward_train` normalizes with the statistics of the batch itself and
//! hands those statistics back so the caller can feed the estimator;
//! `forward_infer` uses only the moving estimate and never mutates anything.

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{BatchStats, EstimatorConfig, MovingStats};

pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub eps: f64,
}

impl NormParams {
    pub fn identity(channels: usize) -> Self {
        Self { gamma: Array1::ones(channels), beta: Array1::zeros(channels), eps: DEFAULT_EPS }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }
}

/// Invocation counter that can be bumped through a shared reference.
#[derive(Debug, Default)]
pub struct CallCounter(AtomicU64);

impl CallCounter {
    pub fn bump(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

impl Clone for CallCounter {
    fn clone(&self) -> Self {
        Self(AtomicU64::new(self.get()))
    }
}

/// How often each statistic source has been used. Counts only; carries no
/// numeric state.
#[derive(Debug, Default, Clone)]
pub struct NormCounters {
    /// Forwards that normalized with batch statistics and cached context.
    pub train: CallCounter,
    /// Forwards that normalized with moving statistics.
    pub infer: CallCounter,
    /// Batch-statistic forwards that cached nothing (calibration, target nets).
    pub batch_only: CallCounter,
}

#[derive(Debug, Clone)]
pub struct NormContext {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormGrads {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone)]
pub struct NormLayer {
    pub params: NormParams,
    moving: MovingStats,
    estimator: EstimatorConfig,
    cache: Option<NormContext>,
    counters: NormCounters,
}

impl NormLayer {
    pub fn new(channels: usize, estimator: EstimatorConfig) -> Self {
        Self::with_params(NormParams::identity(channels), estimator)
    }

    pub fn with_params(params: NormParams, estimator: EstimatorConfig) -> Self {
        let channels = params.channels();
        Self {
            params,
            moving: MovingStats::new(channels),
            estimator,
            cache: None,
            counters: NormCounters::default(),
        }
    }

    pub fn channels(&self) -> usize {
        self.params.channels()
    }

    pub fn moving(&self) -> &MovingStats {
        &self.moving
    }

    pub fn moving_mut(&mut self) -> &mut MovingStats {
        &mut self.moving
    }

    pub fn set_moving(&mut self, moving: MovingStats) -> Result<()> {
        if moving.channels() != self.channels() {
            return Err(Error::dim(self.channels(), moving.channels()));
        }
        self.moving = moving;
        Ok(())
    }

    pub fn estimator(&self) -> &EstimatorConfig {
        &self.estimator
    }

    pub fn counters(&self) -> &NormCounters {
        &self.counters
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }

    fn check_cols(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.channels() {
            return Err(Error::dim(self.channels(), x.ncols()));
        }
        Ok(())
    }

    fn normalize(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, NormContext, BatchStats)> {
        self.check_cols(&x)?;
        let stats = BatchStats::from_rows(x)?;
        let mean = ArrayView1::from(stats.mean());
        let inv_std: Array1<f64> =
            stats.var().iter().map(|v| 1.0 / (v + self.params.eps).sqrt()).collect();
        let x_hat = (&x - &mean) * &inv_std;
        let y = &x_hat * &self.params.gamma + &self.params.beta;
        Ok((y, NormContext { x_hat, inv_std }, stats))
    }

    /// Normalize with batch statistics, cache the context for `backward`, and
    /// return the statistics for the estimator.
    pub fn forward_train(&mut self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, BatchStats)> {
        let (y, ctx, stats) = self.forward_train_ctx(x)?;
        self.cache = Some(ctx);
        Ok((y, stats))
    }

    /// Training forward that returns the backward context instead of caching it,
    /// for owners that keep their own trajectory (the spiking actor).
    pub fn forward_train_ctx(
        &self,
        x: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, NormContext, BatchStats)> {
        let out = self.normalize(x)?;
        self.counters.train.bump();
        Ok(out)
    }

    /// Batch-statistic forward without caching. Leaves the layer untouched.
    pub fn forward_batch(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, BatchStats)> {
        let (y, _, stats) = self.normalize(x)?;
        self.counters.batch_only.bump();
        Ok((y, stats))
    }

    /// Normalize with the moving statistics. Any batch size, including 1.
    pub fn forward_infer(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_cols(&x)?;
        let (scale, shift) = self.inference_affine()?;
        self.counters.infer.bump();
        Ok(&x * &scale + &shift)
    }

    /// Per-channel `(scale, shift)` such that inference BN is `x * scale + shift`.
    pub fn inference_affine(&self) -> Result<(Array1<f64>, Array1<f64>)> {
        if !self.moving.is_initialized() {
            return Err(Error::State("moving statistics are not initialized".into()));
        }
        let p = &self.params;
        let scale: Array1<f64> = self
            .moving
            .var_hat()
            .iter()
            .zip(&p.gamma)
            .map(|(v, g)| g / (v + p.eps).sqrt())
            .collect();
        let mu = ArrayView1::from(self.moving.mu_hat());
        let shift = &p.beta - &(&mu * &scale);
        Ok((scale, shift))
    }

    /// Gradients of the batch-statistic transform for the last `forward_train`.
    /// Moving statistics play no part.
    pub fn backward(&self, grad_out: ArrayView2<'_, f64>) -> Result<(Array2<f64>, NormGrads)> {
        let ctx = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("backward called without a cached training forward".into()))?;
        self.backward_ctx(ctx, grad_out)
    }

    pub fn backward_ctx(
        &self,
        ctx: &NormContext,
        grad_out: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, NormGrads)> {
        if grad_out.dim() != ctx.x_hat.dim() {
            return Err(Error::dim(ctx.x_hat.len(), grad_out.len()));
        }
        let n = grad_out.nrows() as f64;
        let grad_beta = grad_out.sum_axis(Axis(0));
        let grad_gamma = (&grad_out * &ctx.x_hat).sum_axis(Axis(0));
        // dx = γ·inv/N · (N·g − Σg − x̂·Σ(g·x̂))
        let coef = &self.params.gamma * &ctx.inv_std / n;
        let grad_in = ((&grad_out * n) - &grad_beta - &(&ctx.x_hat * &grad_gamma)) * &coef;
        Ok((grad_in, NormGrads { gamma: grad_gamma, beta: grad_beta }))
    }

    /// Advance the moving statistics with `stats` under this layer's estimator.
    pub fn update_estimator(
        &mut self,
        stats: &BatchStats,
        step_index: u64,
        sampler: Option<&mut dyn FnMut(usize) -> Result<Vec<BatchStats>>>,
    ) -> Result<()> {
        let cfg = self.estimator;
        self.moving.step(stats, &cfg, step_index, sampler)
    }

    /// Fold inference normalization into the preceding affine map `y = W x + b`
    /// (`w` is out×in). The returned pair computes `BN_infer(W x + b)`.
    pub fn fuse_into_affine(
        &self,
        w: ArrayView2<'_, f64>,
        b: ArrayView1<'_, f64>,
    ) -> Result<(Array2<f64>, Array1<f64>)> {
        if w.nrows() != self.channels() {
            return Err(Error::dim(self.channels(), w.nrows()));
        }
        if b.len() != self.channels() {
            return Err(Error::dim(self.channels(), b.len()));
        }
        let (scale, shift) = self.inference_affine()?;
        let scale_col = scale.view().insert_axis(Axis(1));
        let w_fused = &w * &scale_col;
        let b_fused = &b * &scale + &shift;
        Ok((w_fused, b_fused))
    }
}
