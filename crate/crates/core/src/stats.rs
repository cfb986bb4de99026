//! Streaming estimators of per-channel population mean and variance.
//!
//! Three update rules share one state type, [`MovingStats`]:
//!
//! * fixed-momentum EMA, the conventional batch-norm running average;
//! * the confidence-adaptive update, which blends the previous estimate and
//!   the current mini-batch statistic with a Kalman-style gain computed from
//!   the estimated error variance of each side;
//! * recalibration, which overwrites the estimate with statistics pooled
//!   over several equally sized batches.
//!
//! All state is kept independently per channel.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Added to every gain denominator so all-equal batches (zero variance) stay finite.
pub const GAIN_FLOOR: f64 = 1e-12;

/// Per-channel mini-batch statistics. Variance is the population form (divide by `n`).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats {
    mean: Vec<f64>,
    var: Vec<f64>,
    n: usize,
}

impl BatchStats {
    pub fn new(mean: Vec<f64>, var: Vec<f64>, n: usize) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::dim(mean.len(), var.len()));
        }
        if n < 2 {
            return Err(Error::InvalidBatch(format!(
                "batch statistics need at least 2 samples, got {n}"
            )));
        }
        if let Some(v) = mean.iter().chain(&var).find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("batch statistic {v}")));
        }
        if let Some(v) = var.iter().find(|v| **v < 0.0) {
            return Err(Error::Numeric(format!("negative batch variance {v}")));
        }
        Ok(Self { mean, var, n })
    }

    /// Statistics of the rows of `x` (samples × channels).
    pub fn from_rows(x: ArrayView2<'_, f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::InvalidBatch(format!(
                "batch statistics need at least 2 samples, got {n}"
            )));
        }
        let inv_n = 1.0 / n as f64;
        let mut mean = vec![0.0; x.ncols()];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m *= inv_n);
        let mut var = vec![0.0; x.ncols()];
        for row in x.rows() {
            for ((s, m), v) in var.iter_mut().zip(&mean).zip(row) {
                let d = v - m;
                *s += d * d;
            }
        }
        var.iter_mut().for_each(|s| *s *= inv_n);
        Self::new(mean, var, n)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    /// Error variance of the batch mean as an estimate of the population mean, `σ²/N`.
    pub fn mean_noise(&self, c: usize) -> f64 {
        self.var[c] / self.n as f64
    }

    /// Error variance of the batch variance under Gaussian sampling, `2σ⁴/(N−1)`.
    pub fn var_noise(&self, c: usize) -> f64 {
        2.0 * self.var[c] * self.var[c] / (self.n - 1) as f64
    }
}

/// Gain of the minimum-MSE convex blend of two unbiased estimators whose
/// error variances are `prior` (previous estimate) and `batch` (new sample).
pub fn blend_gain(prior: f64, batch: f64) -> f64 {
    prior / (prior + batch + GAIN_FLOOR)
}

/// Which update rule drives the moving statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorMode {
    Ema,
    Ca,
    CaRe,
    EmaRe,
}

impl EstimatorMode {
    pub fn adaptive(self) -> bool {
        matches!(self, EstimatorMode::Ca | EstimatorMode::CaRe)
    }

    pub fn recalibrates(self) -> bool {
        matches!(self, EstimatorMode::CaRe | EstimatorMode::EmaRe)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorMode::Ema => "ema",
            EstimatorMode::Ca => "ca",
            EstimatorMode::CaRe => "ca_re",
            EstimatorMode::EmaRe => "ema_re",
        }
    }
}

impl std::fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EstimatorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ema" => Ok(EstimatorMode::Ema),
            "ca" => Ok(EstimatorMode::Ca),
            "ca_re" | "care" => Ok(EstimatorMode::CaRe),
            "ema_re" => Ok(EstimatorMode::EmaRe),
            other => Err(Error::InvalidArgument(format!("unknown estimator mode `{other}`"))),
        }
    }
}

/// Estimator mode plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub mode: EstimatorMode,
    /// Momentum of the EMA update and of the confidence tracking.
    pub alpha: f64,
    /// Recalibration interval, in update steps.
    pub t_cal: usize,
    /// Number of calibration batches pooled per recalibration.
    pub m_cal: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { mode: EstimatorMode::CaRe, alpha: 0.1, t_cal: 1000, m_cal: 20 }
    }
}

impl EstimatorConfig {
    pub fn with_mode(mode: EstimatorMode) -> Self {
        Self { mode, ..Self::default() }
    }

    /// Returns every violated invariant, prefixed with `prefix`.
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("{prefix}alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.t_cal < 1 {
            out.push(format!("{prefix}t_cal must be >= 1"));
        }
        if self.m_cal < 1 || self.m_cal > self.t_cal {
            out.push(format!(
                "{prefix}m_cal must satisfy 1 <= m_cal <= t_cal, got m_cal={} t_cal={}",
                self.m_cal, self.t_cal
            ));
        }
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

    /// True when `step_index` is a recalibration step for this configuration.
    pub fn recalibration_due(&self, step_index: u64) -> bool {
        self.mode.recalibrates() && step_index > 0 && step_index.is_multiple_of(self.t_cal as u64)
    }
}

/// Moving mean/variance with the confidence state used by the adaptive update.
///
/// `d_mu` and `d_sigma` estimate the error variance of the previous mean and
/// variance estimates respectively. Nothing is meaningful until `initialized`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MovingStatsRecord", into = "MovingStatsRecord")]
pub struct MovingStats {
    mu_hat: Vec<f64>,
    var_hat: Vec<f64>,
    d_mu: Vec<f64>,
    d_sigma: Vec<f64>,
    initialized: bool,
}

impl MovingStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mu_hat: vec![0.0; channels],
            var_hat: vec![1.0; channels],
            d_mu: vec![0.0; channels],
            d_sigma: vec![0.0; channels],
            initialized: false,
        }
    }

    /// Initialized state from explicit values.
    pub fn from_parts(
        mu_hat: Vec<f64>,
        var_hat: Vec<f64>,
        d_mu: Vec<f64>,
        d_sigma: Vec<f64>,
    ) -> Result<Self> {
        let c = mu_hat.len();
        for len in [var_hat.len(), d_mu.len(), d_sigma.len()] {
            if len != c {
                return Err(Error::dim(c, len));
            }
        }
        if let Some(v) = mu_hat.iter().chain(&var_hat).chain(&d_mu).chain(&d_sigma).find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("moving statistic {v}")));
        }
        if var_hat.iter().chain(&d_mu).chain(&d_sigma).any(|v| *v < 0.0) {
            return Err(Error::Numeric("variances and confidences must be nonnegative".into()));
        }
        Ok(Self { mu_hat, var_hat, d_mu, d_sigma, initialized: true })
    }

    pub fn channels(&self) -> usize {
        self.mu_hat.len()
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn mu_hat(&self) -> &[f64] {
        &self.mu_hat
    }

    pub fn var_hat(&self) -> &[f64] {
        &self.var_hat
    }

    pub fn d_mu(&self) -> &[f64] {
        &self.d_mu
    }

    pub fn d_sigma(&self) -> &[f64] {
        &self.d_sigma
    }

    /// Read-only copy of `(mu_hat, var_hat)`; `None` before the first update.
    pub fn snapshot(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        self.initialized.then(|| (self.mu_hat.clone(), self.var_hat.clone()))
    }

    fn check(&self, bs: &BatchStats) -> Result<()> {
        if bs.channels() != self.channels() {
            return Err(Error::dim(self.channels(), bs.channels()));
        }
        Ok(())
    }

    fn bootstrap(&mut self, bs: &BatchStats) {
        self.mu_hat.copy_from_slice(bs.mean());
        self.var_hat.copy_from_slice(bs.var());
        for c in 0..self.channels() {
            self.d_mu[c] = bs.mean_noise(c);
            self.d_sigma[c] = bs.var_noise(c);
        }
        self.initialized = true;
    }

    /// Fixed-momentum exponential moving average. The first batch is copied in.
    pub fn ema_update(&mut self, bs: &BatchStats, alpha: f64) -> Result<()> {
        self.check(bs)?;
        if !self.initialized {
            self.bootstrap(bs);
            return Ok(());
        }
        for c in 0..self.channels() {
            self.mu_hat[c] = (1.0 - alpha) * self.mu_hat[c] + alpha * bs.mean[c];
            self.var_hat[c] = (1.0 - alpha) * self.var_hat[c] + alpha * bs.var[c];
        }
        Ok(())
    }

    /// Confidence-adaptive update.
    ///
    /// Per channel, first smooth the squared innovation into `d_mu`/`d_sigma`
    /// (using the estimate from before this step), then blend previous
    /// estimate and batch statistic with gains
    /// `K = D / (D + batch noise)`. The first batch is copied in and seeds the
    /// confidences with the batch noise terms, so the second step starts at
    /// `K = 0.5` on both statistics.
    pub fn ca_update(&mut self, bs: &BatchStats, alpha: f64) -> Result<()> {
        self.check(bs)?;
        if !self.initialized {
            self.bootstrap(bs);
            return Ok(());
        }
        if let Some(v) = self.mu_hat.iter().chain(&self.var_hat).find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("moving statistic {v}")));
        }
        for c in 0..self.channels() {
            let innov_mu = bs.mean[c] - self.mu_hat[c];
            let innov_var = bs.var[c] - self.var_hat[c];
            self.d_mu[c] = (1.0 - alpha) * self.d_mu[c] + alpha * innov_mu * innov_mu;
            self.d_sigma[c] = (1.0 - alpha) * self.d_sigma[c] + alpha * innov_var * innov_var;

            let k_mu = blend_gain(self.d_mu[c], bs.mean_noise(c));
            let k_sigma = blend_gain(self.d_sigma[c], bs.var_noise(c));
            self.mu_hat[c] = (1.0 - k_mu) * self.mu_hat[c] + k_mu * bs.mean[c];
            self.var_hat[c] = ((1.0 - k_sigma) * self.var_hat[c] + k_sigma * bs.var[c]).max(0.0);
        }
        if let Some(v) = self.d_mu.iter().chain(&self.d_sigma).find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("confidence overflowed to {v}")));
        }
        Ok(())
    }

    /// Gains the adaptive update would apply for `bs` right now, after the
    /// confidence step. Does not mutate.
    pub fn preview_gains(&self, bs: &BatchStats, alpha: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(bs)?;
        let mut probe = self.clone();
        if !probe.initialized {
            return Err(Error::State("gains are undefined before the first update".into()));
        }
        let mut k_mu = Vec::with_capacity(self.channels());
        let mut k_sigma = Vec::with_capacity(self.channels());
        for c in 0..self.channels() {
            let im = bs.mean[c] - probe.mu_hat[c];
            let iv = bs.var[c] - probe.var_hat[c];
            probe.d_mu[c] = (1.0 - alpha) * probe.d_mu[c] + alpha * im * im;
            probe.d_sigma[c] = (1.0 - alpha) * probe.d_sigma[c] + alpha * iv * iv;
            k_mu.push(blend_gain(probe.d_mu[c], bs.mean_noise(c)));
            k_sigma.push(blend_gain(probe.d_sigma[c], bs.var_noise(c)));
        }
        Ok((k_mu, k_sigma))
    }

    /// Overwrite `(mu_hat, var_hat)` with pooled statistics of `batches`.
    /// Confidence state is left as is.
    pub fn recalibrate(&mut self, batches: &[BatchStats]) -> Result<()> {
        let (mu, var) = recalibrate(batches)?;
        if mu.len() != self.channels() {
            return Err(Error::dim(self.channels(), mu.len()));
        }
        if !self.initialized {
            for c in 0..self.channels() {
                self.d_mu[c] = batches[0].mean_noise(c);
                self.d_sigma[c] = batches[0].var_noise(c);
            }
            self.initialized = true;
        }
        self.mu_hat = mu;
        self.var_hat = var;
        Ok(())
    }

    /// The per-step part of `cfg`: adaptive or EMA update, never recalibration.
    pub fn base_update(&mut self, bs: &BatchStats, cfg: &EstimatorConfig) -> Result<()> {
        if cfg.mode.adaptive() {
            self.ca_update(bs, cfg.alpha)
        } else {
            self.ema_update(bs, cfg.alpha)
        }
    }

    /// One estimator step under `cfg`: the EMA or adaptive update, followed on
    /// the recalibration schedule by pooling the batches returned from
    /// `sampler(m_cal)`.
    pub fn step(
        &mut self,
        bs: &BatchStats,
        cfg: &EstimatorConfig,
        step_index: u64,
        sampler: Option<&mut dyn FnMut(usize) -> Result<Vec<BatchStats>>>,
    ) -> Result<()> {
        if cfg.mode.recalibrates() && sampler.is_none() {
            return Err(Error::Config(format!(
                "estimator mode {} needs a calibration sampler",
                cfg.mode
            )));
        }
        self.base_update(bs, cfg)?;
        if cfg.recalibration_due(step_index) {
            let sampler = sampler.expect("checked above");
            let batches = sampler(cfg.m_cal)?;
            if batches.len() != cfg.m_cal {
                return Err(Error::InvalidArgument(format!(
                    "calibration sampler returned {} batches, expected {}",
                    batches.len(),
                    cfg.m_cal
                )));
            }
            self.recalibrate(&batches)?;
        }
        Ok(())
    }
}

/// Pooled mean and variance of `M` equally sized batches:
/// `μ = mean_j μ_j`, `σ² = mean_j (σ_j² + μ_j²) − μ²`.
pub fn recalibrate(batches: &[BatchStats]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = batches
        .first()
        .ok_or_else(|| Error::InvalidArgument("recalibration needs at least one batch".into()))?;
    let channels = first.channels();
    for b in batches {
        if b.channels() != channels {
            return Err(Error::dim(channels, b.channels()));
        }
        if b.n() != first.n() {
            return Err(Error::InvalidArgument(format!(
                "calibration batches must share one size, got {} and {}",
                first.n(),
                b.n()
            )));
        }
    }
    let m = batches.len() as f64;
    let mut mu = vec![0.0; channels];
    let mut second = vec![0.0; channels];
    for b in batches {
        for c in 0..channels {
            mu[c] += b.mean[c];
            second[c] += b.var[c] + b.mean[c] * b.mean[c];
        }
    }
    let mut var = Vec::with_capacity(channels);
    for c in 0..channels {
        mu[c] /= m;
        second[c] /= m;
        let v = second[c] - mu[c] * mu[c];
        // Cancellation error scales with the raw second moment.
        let tol = 1e-12 * second[c].max(1.0);
        if v < -tol {
            return Err(Error::Numeric(format!("pooled variance {v} is negative")));
        }
        var.push(v.max(0.0));
    }
    Ok((mu, var))
}

/// On-disk form: flat per-channel arrays under a channel-count header.
#[derive(Serialize, Deserialize)]
struct MovingStatsRecord {
    channels: usize,
    initialized: bool,
    mu_hat: Vec<f64>,
    var_hat: Vec<f64>,
    d_mu: Vec<f64>,
    d_sigma: Vec<f64>,
}

impl From<MovingStats> for MovingStatsRecord {
    fn from(m: MovingStats) -> Self {
        Self {
            channels: m.channels(),
            initialized: m.initialized,
            mu_hat: m.mu_hat,
            var_hat: m.var_hat,
            d_mu: m.d_mu,
            d_sigma: m.d_sigma,
        }
    }
}

impl TryFrom<MovingStatsRecord> for MovingStats {
    type Error = Error;

    fn try_from(r: MovingStatsRecord) -> Result<Self> {
        if r.mu_hat.len() != r.channels {
            return Err(Error::dim(r.channels, r.mu_hat.len()));
        }
        let mut m = MovingStats::from_parts(r.mu_hat, r.var_hat, r.d_mu, r.d_sigma)?;
        m.initialized = r.initialized;
        Ok(m)
    }
}
