use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Flat, ordered view over a set of parameter (or gradient) tensors.
///
/// Parameters and their gradients must enumerate tensors in the same order.
pub trait ParamSet {
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }
}

pub(crate) fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are stored contiguously")
}

pub(crate) fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored contiguously")
}

/// Affine map `y = x Wᵀ + b`, `w` stored out×in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    /// Uniform fan-in initialization, `U(−1/√in, 1/√in)` for weights and bias.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs.max(1) as f64).sqrt();
        let w = Array2::from_shape_simple_fn((outputs, inputs), || rng.random_range(-bound..bound));
        let b = Array1::from_shape_simple_fn(outputs, || rng.random_range(-bound..bound));
        Self { w, b }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: Array2::zeros((outputs, inputs)), b: Array1::zeros(outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.inputs() {
            return Err(Error::dim(self.inputs(), x.ncols()));
        }
        Ok(x.dot(&self.w.t()) + &self.b)
    }

    /// Parameter gradients for input `x` and upstream gradient `grad_out`.
    pub fn param_grads(&self, x: ArrayView2<'_, f64>, grad_out: ArrayView2<'_, f64>) -> Linear {
        let w = grad_out.t().dot(&x);
        // The product of transposed views can come back column-major.
        let w = if w.is_standard_layout() { w } else { w.as_standard_layout().into_owned() };
        Linear { w, b: grad_out.sum_axis(Axis(0)) }
    }

    pub fn input_grad(&self, grad_out: ArrayView2<'_, f64>) -> Array2<f64> {
        grad_out.dot(&self.w)
    }
}

impl ParamSet for Linear {
    fn slices(&self) -> Vec<&[f64]> {
        vec![flat(&self.w), flat(&self.b)]
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![flat_mut(&mut self.w), flat_mut(&mut self.b)]
    }
}

/// `target ← τ·online + (1 − τ)·target`, tensor by tensor.
pub fn soft_update<P: ParamSet>(target: &mut P, online: &P, tau: f64) {
    for (t, o) in target.slices_mut().into_iter().zip(online.slices()) {
        for (t, o) in t.iter_mut().zip(o) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Gradient-descent step on `params` with `grads`.
    pub fn step<P: ParamSet, G: ParamSet>(&mut self, params: &mut P, grads: &G) -> Result<()> {
        let gs = grads.slices();
        let mut ps = params.slices_mut();
        if gs.len() != ps.len() {
            return Err(Error::dim(ps.len(), gs.len()));
        }
        if self.m.is_empty() {
            self.m = gs.iter().map(|g| vec![0.0; g.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in ps.iter_mut().zip(gs).enumerate() {
            if p.len() != g.len() || self.m[k].len() != g.len() {
                return Err(Error::dim(p.len(), g.len()));
            }
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..g.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
