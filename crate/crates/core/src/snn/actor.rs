//! Spiking actor network.
//!
//! The observation is injected as a constant current at every timestep. Each
//! hidden layer is `affine → batch norm → spiking neurons`; the output layer
//! is a non-spiking integrator whose potential is averaged over the `T`
//! timesteps and squashed with `action_scale · tanh`.
//!
//! Batch statistics of a hidden layer pool all `batch × T` rows, so every
//! layer owns a single [`MovingStats`](crate::stats::MovingStats).

use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{flat, flat_mut, Linear, ParamSet};
use super::neuron::{surrogate_grad, NeuronModel, NeuronParams, SpikeFn};
use crate::error::{Error, Result};
use crate::norm::{NormContext, NormGrads, NormLayer, NormParams};
use crate::stats::{BatchStats, EstimatorConfig, MovingStats};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub obs_dim: usize,
    pub action_dim: usize,
    pub hidden: Vec<usize>,
    pub timesteps: usize,
    pub neuron: NeuronModel,
    pub neuron_params: NeuronParams,
    pub action_scale: f64,
}

impl ActorConfig {
    pub fn new(obs_dim: usize, action_dim: usize) -> Self {
        Self {
            obs_dim,
            action_dim,
            hidden: vec![256, 256],
            timesteps: 5,
            neuron: NeuronModel::Clif,
            neuron_params: NeuronParams::default(),
            action_scale: 1.0,
        }
    }

    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = self.neuron_params.violations(&format!("{prefix}neuron_params."));
        if self.obs_dim == 0 || self.action_dim == 0 {
            out.push(format!("{prefix}obs_dim and action_dim must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            out.push(format!("{prefix}hidden must list at least one positive width"));
        }
        if self.timesteps == 0 {
            out.push(format!("{prefix}timesteps must be positive"));
        }
        if !(self.action_scale > 0.0) {
            out.push(format!("{prefix}action_scale must be positive"));
        }
        out
    }
}

/// Which statistics the hidden-layer batch norms use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsSource {
    /// Statistics of the batch being propagated (training, target, calibration).
    Batch,
    /// Moving statistics (action selection, evaluation).
    Moving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    Train,
    Batch,
    Infer,
}

#[derive(Debug, Clone)]
pub struct SpikingLayer {
    pub linear: Linear,
    pub norm: NormLayer,
}

#[derive(Debug, Clone)]
struct LayerTrace {
    input: Array2<f64>,
    norm: NormContext,
    h: Array2<f64>,
    s: Array2<f64>,
}

#[derive(Debug, Clone)]
struct ActorCache {
    batch: usize,
    layers: Vec<LayerTrace>,
    u_mean: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorGrads {
    pub layers: Vec<(Linear, NormGrads)>,
    pub out: Linear,
}

impl ParamSet for ActorGrads {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(4 * self.layers.len() + 2);
        for (l, n) in &self.layers {
            v.extend([flat(&l.w), flat(&l.b), flat(&n.gamma), flat(&n.beta)]);
        }
        v.extend([flat(&self.out.w), flat(&self.out.b)]);
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(4 * self.layers.len() + 2);
        for (l, n) in &mut self.layers {
            v.extend([flat_mut(&mut l.w), flat_mut(&mut l.b), flat_mut(&mut n.gamma), flat_mut(&mut n.beta)]);
        }
        v.extend([flat_mut(&mut self.out.w), flat_mut(&mut self.out.b)]);
        v
    }
}

/// Serializable snapshot of the actor's learnable and estimator state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorWeights {
    pub layers: Vec<LayerWeights>,
    pub out: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub linear: Linear,
    pub norm: NormParams,
    pub moving: MovingStats,
}

#[derive(Debug, Clone)]
pub struct ActorNet {
    cfg: ActorConfig,
    pub layers: Vec<SpikingLayer>,
    pub out: Linear,
    spike_fn: SpikeFn,
    cache: Option<ActorCache>,
}

impl ActorNet {
    pub fn new<R: Rng + ?Sized>(cfg: ActorConfig, estimator: EstimatorConfig, rng: &mut R) -> Result<Self> {
        let v = cfg.violations("actor.");
        if !v.is_empty() {
            return Err(Error::Validation(v));
        }
        let mut layers = Vec::with_capacity(cfg.hidden.len());
        let mut inputs = cfg.obs_dim;
        for &width in &cfg.hidden {
            layers.push(SpikingLayer {
                linear: Linear::new(inputs, width, rng),
                norm: NormLayer::new(width, estimator),
            });
            inputs = width;
        }
        let out = Linear::new(inputs, cfg.action_dim, rng);
        Ok(Self { cfg, layers, out, spike_fn: SpikeFn::Heaviside, cache: None })
    }

    pub fn config(&self) -> &ActorConfig {
        &self.cfg
    }

    pub fn spike_fn(&self) -> SpikeFn {
        self.spike_fn
    }

    /// Switch the spike nonlinearity. [`SpikeFn::Relaxed`] exists for gradient checks.
    pub fn set_spike_fn(&mut self, f: SpikeFn) {
        self.spike_fn = f;
        self.cache = None;
    }

    pub fn has_cache(&self) -> bool {
        self.cache.is_some()
    }

    fn check_obs(&self, obs: &ArrayView2<'_, f64>) -> Result<()> {
        if obs.ncols() != self.cfg.obs_dim {
            return Err(Error::dim(self.cfg.obs_dim, obs.ncols()));
        }
        if let Some(x) = obs.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("observation {x}")));
        }
        Ok(())
    }

    /// Inference forward with moving statistics, or a pure batch-statistic forward.
    pub fn act(&self, obs: ArrayView2<'_, f64>, source: StatsSource) -> Result<Array2<f64>> {
        match source {
            StatsSource::Moving => Ok(self.propagate(obs, Pass::Infer)?.0),
            StatsSource::Batch => Ok(self.propagate(obs, Pass::Batch)?.0),
        }
    }

    /// Batch-statistic forward that caches the trajectory for [`backward`](Self::backward)
    /// and returns the per-layer batch statistics.
    pub fn forward_train(&mut self, obs: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<BatchStats>)> {
        let (actions, stats, cache) = self.propagate(obs, Pass::Train)?;
        self.cache = cache;
        Ok((actions, stats))
    }

    /// Batch-statistic forward that touches nothing; returns actions and per-layer statistics.
    pub fn forward_batch(&self, obs: ArrayView2<'_, f64>) -> Result<(Array2<f64>, Vec<BatchStats>)> {
        let (actions, stats, _) = self.propagate(obs, Pass::Batch)?;
        Ok((actions, stats))
    }

    /// Pre-normalization input currents of the first hidden layer, one row per
    /// `(timestep, sample)` pair.
    pub fn first_layer_currents(&self, obs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_obs(&obs)?;
        let x = tile(obs, self.cfg.timesteps);
        self.layers[0].linear.forward(x.view())
    }

    fn propagate(
        &self,
        obs: ArrayView2<'_, f64>,
        pass: Pass,
    ) -> Result<(Array2<f64>, Vec<BatchStats>, Option<ActorCache>)> {
        self.check_obs(&obs)?;
        let batch = obs.nrows();
        let mut x = tile(obs, self.cfg.timesteps);
        let mut stats = Vec::new();
        let mut traces = Vec::new();
        for layer in &self.layers {
            let z = layer.linear.forward(x.view())?;
            let (c, ctx) = match pass {
                Pass::Train => {
                    let (c, ctx, bs) = layer.norm.forward_train_ctx(z.view())?;
                    stats.push(bs);
                    (c, Some(ctx))
                }
                Pass::Batch => {
                    let (c, bs) = layer.norm.forward_batch(z.view())?;
                    stats.push(bs);
                    (c, None)
                }
                Pass::Infer => (layer.norm.forward_infer(z.view())?, None),
            };
            let (h, s) = self.integrate(&c, batch);
            if let Some(norm) = ctx {
                traces.push(LayerTrace { input: x, norm, h, s: s.clone() });
            }
            x = s;
        }
        let u = self.out.forward(x.view())?;
        let u_mean = block_mean(&u, batch);
        let scale = self.cfg.action_scale;
        let actions = u_mean.mapv(|v| scale * v.tanh());
        let cache = (pass == Pass::Train).then_some(ActorCache { batch, layers: traces, u_mean });
        Ok((actions, stats, cache))
    }

    /// Run the neuron dynamics over stacked per-timestep currents `c`
    /// (`T·batch × width`). Returns stacked potentials `H` and spikes `S`.
    fn integrate(&self, c: &Array2<f64>, batch: usize) -> (Array2<f64>, Array2<f64>) {
        let p = &self.cfg.neuron_params;
        let clif = self.cfg.neuron == NeuronModel::Clif;
        let dim = c.dim();
        let block = batch * dim.1;
        let c = c.as_standard_layout();
        let cs = c.as_slice().expect("standard layout");
        let mut h = vec![0.0; cs.len()];
        let mut s = vec![0.0; cs.len()];
        let mut v = vec![p.v_reset; block];
        let mut cur = vec![0.0; block];
        for t in 0..self.cfg.timesteps {
            let off = t * block;
            for i in 0..block {
                cur[i] = if clif { p.current_decay * cur[i] + cs[off + i] } else { cs[off + i] };
                let hh = p.lambda * v[i] + cur[i];
                let ss = self.spike_fn.fire(hh, p);
                v[i] = (1.0 - ss) * hh + ss * p.v_reset;
                h[off + i] = hh;
                s[off + i] = ss;
            }
        }
        let h = Array2::from_shape_vec(dim, h).expect("shape");
        let s = Array2::from_shape_vec(dim, s).expect("shape");
        (h, s)
    }

    /// Backpropagation through time for the neuron dynamics: maps dL/dS
    /// (stacked) to dL/dC (stacked). The spike derivative is the rectangular
    /// surrogate; the reset path `(1 − S)·H + S·V_reset` is differentiated in full.
    fn integrate_backward(&self, trace: &LayerTrace, ds: &Array2<f64>, batch: usize) -> Array2<f64> {
        let p = &self.cfg.neuron_params;
        let clif = self.cfg.neuron == NeuronModel::Clif;
        let dim = ds.dim();
        let block = batch * dim.1;
        let ds = ds.as_standard_layout();
        let (hs, ss, gs) = (
            trace.h.as_slice().expect("standard layout"),
            trace.s.as_slice().expect("standard layout"),
            ds.as_slice().expect("standard layout"),
        );
        let mut dc = vec![0.0; gs.len()];
        let mut dv = vec![0.0; block];
        let mut dcur_next = vec![0.0; block];
        for t in (0..self.cfg.timesteps).rev() {
            let off = t * block;
            for i in 0..block {
                let h = hs[off + i];
                let s = ss[off + i];
                let sg = surrogate_grad(h, p);
                let dh = gs[off + i] * sg + dv[i] * ((1.0 - s) + (p.v_reset - h) * sg);
                let dcur = if clif { dh + p.current_decay * dcur_next[i] } else { dh };
                dc[off + i] = dcur;
                dcur_next[i] = dcur;
                dv[i] = p.lambda * dh;
            }
        }
        Array2::from_shape_vec(dim, dc).expect("shape")
    }

    /// Parameter gradients of `Σ grad_action ⊙ action` for the cached training forward.
    pub fn backward(&self, grad_action: ArrayView2<'_, f64>) -> Result<ActorGrads> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::State("actor backward needs a cached training forward".into()))?;
        if grad_action.dim() != cache.u_mean.dim() {
            return Err(Error::dim(cache.u_mean.len(), grad_action.len()));
        }
        let batch = cache.batch;
        let t_steps = self.cfg.timesteps as f64;
        let scale = self.cfg.action_scale;
        let g_u = ndarray::Zip::from(&grad_action)
            .and(&cache.u_mean)
            .map_collect(|g, u| {
                let th = u.tanh();
                g * scale * (1.0 - th * th) / t_steps
            });
        let g_stack = tile(g_u.view(), self.cfg.timesteps);
        let last = &cache.layers.last().expect("at least one hidden layer").s;
        let out_grads = self.out.param_grads(last.view(), g_stack.view());
        let mut ds = self.out.input_grad(g_stack.view());

        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (k, (layer, trace)) in self.layers.iter().zip(&cache.layers).enumerate().rev() {
            let dc = self.integrate_backward(trace, &ds, batch);
            let (dz, norm_grads) = layer.norm.backward_ctx(&trace.norm, dc.view())?;
            layer_grads.push((layer.linear.param_grads(trace.input.view(), dz.view()), norm_grads));
            if k > 0 {
                ds = layer.linear.input_grad(dz.view());
            }
        }
        layer_grads.reverse();
        Ok(ActorGrads { layers: layer_grads, out: out_grads })
    }

    /// Advance every hidden layer's estimator (EMA or adaptive, per its
    /// configuration) with the statistics from a training forward.
    pub fn update_estimators(&mut self, stats: &[BatchStats]) -> Result<()> {
        if stats.len() != self.layers.len() {
            return Err(Error::dim(self.layers.len(), stats.len()));
        }
        for (layer, bs) in self.layers.iter_mut().zip(stats) {
            let cfg = *layer.norm.estimator();
            layer.norm.moving_mut().base_update(bs, &cfg)?;
        }
        Ok(())
    }

    /// Overwrite every hidden layer's moving statistics with the pooled
    /// statistics of its calibration batches (`per_layer[k]` for layer `k`).
    pub fn recalibrate(&mut self, per_layer: &[Vec<BatchStats>]) -> Result<()> {
        if per_layer.len() != self.layers.len() {
            return Err(Error::dim(self.layers.len(), per_layer.len()));
        }
        for (layer, batches) in self.layers.iter_mut().zip(per_layer) {
            layer.norm.moving_mut().recalibrate(batches)?;
        }
        Ok(())
    }

    pub fn estimators_initialized(&self) -> bool {
        self.layers.iter().all(|l| l.norm.moving().is_initialized())
    }

    pub fn weights(&self) -> ActorWeights {
        ActorWeights {
            layers: self
                .layers
                .iter()
                .map(|l| LayerWeights {
                    linear: l.linear.clone(),
                    norm: l.norm.params.clone(),
                    moving: l.norm.moving().clone(),
                })
                .collect(),
            out: self.out.clone(),
        }
    }

    pub fn load_weights(&mut self, w: ActorWeights) -> Result<()> {
        if w.layers.len() != self.layers.len() {
            return Err(Error::dim(self.layers.len(), w.layers.len()));
        }
        for (layer, lw) in self.layers.iter().zip(&w.layers) {
            if lw.linear.w.dim() != layer.linear.w.dim() || lw.norm.channels() != layer.norm.channels() {
                return Err(Error::dim(layer.linear.w.len(), lw.linear.w.len()));
            }
        }
        if w.out.w.dim() != self.out.w.dim() {
            return Err(Error::dim(self.out.w.len(), w.out.w.len()));
        }
        for (layer, lw) in self.layers.iter_mut().zip(w.layers) {
            layer.linear = lw.linear;
            layer.norm.params = lw.norm;
            layer.norm.set_moving(lw.moving)?;
        }
        self.out = w.out;
        self.cache = None;
        Ok(())
    }

    /// Fold each hidden layer's inference normalization into its affine weights.
    pub fn fused(&self) -> Result<FusedActor> {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let (w, b) = l.norm.fuse_into_affine(l.linear.w.view(), l.linear.b.view())?;
                Ok(Linear { w, b })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FusedActor { inner: self.clone(), layers })
    }
}

impl ParamSet for ActorNet {
    fn slices(&self) -> Vec<&[f64]> {
        let mut v = Vec::with_capacity(4 * self.layers.len() + 2);
        for l in &self.layers {
            v.extend([
                flat(&l.linear.w),
                flat(&l.linear.b),
                flat(&l.norm.params.gamma),
                flat(&l.norm.params.beta),
            ]);
        }
        v.extend([flat(&self.out.w), flat(&self.out.b)]);
        v
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::with_capacity(4 * self.layers.len() + 2);
        for l in &mut self.layers {
            let params = &mut l.norm.params;
            v.extend([
                flat_mut(&mut l.linear.w),
                flat_mut(&mut l.linear.b),
                flat_mut(&mut params.gamma),
                flat_mut(&mut params.beta),
            ]);
        }
        v.extend([flat_mut(&mut self.out.w), flat_mut(&mut self.out.b)]);
        v
    }
}

/// Deployment form of the actor: batch norm folded into the synaptic weights.
#[derive(Debug, Clone)]
pub struct FusedActor {
    inner: ActorNet,
    layers: Vec<Linear>,
}

impl FusedActor {
    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn act(&self, obs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.inner.check_obs(&obs)?;
        let batch = obs.nrows();
        let mut x = tile(obs, self.inner.cfg.timesteps);
        for l in &self.layers {
            let c = l.forward(x.view())?;
            x = self.inner.integrate(&c, batch).1;
        }
        let u = self.inner.out.forward(x.view())?;
        let scale = self.inner.cfg.action_scale;
        Ok(block_mean(&u, batch).mapv(|v| scale * v.tanh()))
    }
}

/// Stack `times` copies of `x` along rows.
fn tile(x: ArrayView2<'_, f64>, times: usize) -> Array2<f64> {
    let views = vec![x; times];
    concatenate(Axis(0), &views).expect("equal shapes")
}

/// Mean over the `T` row blocks of a stacked `T·batch × k` matrix.
fn block_mean(u: &Array2<f64>, batch: usize) -> Array2<f64> {
    let blocks = u.nrows() / batch;
    let mut acc = Array2::zeros((batch, u.ncols()));
    for t in 0..blocks {
        acc += &u.slice(ndarray::s![t * batch..(t + 1) * batch, ..]);
    }
    acc / blocks as f64
}
