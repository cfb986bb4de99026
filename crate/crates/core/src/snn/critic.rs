//! Dense ReLU critic `Q(s, a)`, no normalization.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::{Linear, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    obs_dim: usize,
    action_dim: usize,
    layers: Vec<Linear>,
}

/// Activations kept from a forward pass for [`CriticNet::backward`].
#[derive(Debug, Clone)]
pub struct CriticCache {
    /// Input and post-activation of every hidden layer, in order.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticGrads {
    pub layers: Vec<Linear>,
}

impl ParamSet for CriticGrads {
    fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.slices()).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect()
    }
}

impl CriticNet {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut layers = Vec::with_capacity(hidden.len() + 1);
        let mut inputs = obs_dim + action_dim;
        for &w in hidden {
            layers.push(Linear::new(inputs, w, rng));
            inputs = w;
        }
        layers.push(Linear::new(inputs, 1, rng));
        Self { obs_dim, action_dim, layers }
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    fn input(&self, state: ArrayView2<'_, f64>, action: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if state.ncols() != self.obs_dim {
            return Err(Error::dim(self.obs_dim, state.ncols()));
        }
        if action.ncols() != self.action_dim {
            return Err(Error::dim(self.action_dim, action.ncols()));
        }
        if state.nrows() != action.nrows() {
            return Err(Error::dim(state.nrows(), action.nrows()));
        }
        Ok(concatenate(Axis(1), &[state, action]).expect("row counts checked"))
    }

    pub fn forward(
        &self,
        state: ArrayView2<'_, f64>,
        action: ArrayView2<'_, f64>,
    ) -> Result<(Array1<f64>, CriticCache)> {
        let mut x = self.input(state, action)?;
        let hidden = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(hidden + 1);
        let mut pre = Vec::with_capacity(hidden);
        for layer in &self.layers[..hidden] {
            let z = layer.forward(x.view())?;
            let a = z.mapv(|v| v.max(0.0));
            inputs.push(x);
            pre.push(z);
            x = a;
        }
        let q = self.layers[hidden].forward(x.view())?;
        inputs.push(x);
        Ok((q.column(0).to_owned(), CriticCache { inputs, pre }))
    }

    pub fn q_values(&self, state: ArrayView2<'_, f64>, action: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        Ok(self.forward(state, action)?.0)
    }

    /// Gradients of `Σ grad_q ⊙ Q` with respect to the parameters and to the action input.
    pub fn backward(&self, cache: &CriticCache, grad_q: ArrayView1<'_, f64>) -> Result<(CriticGrads, Array2<f64>)> {
        let rows = cache.inputs[0].nrows();
        if grad_q.len() != rows {
            return Err(Error::dim(rows, grad_q.len()));
        }
        let mut g = grad_q.to_owned().insert_axis(Axis(1));
        let mut grads = Vec::with_capacity(self.layers.len());
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            grads.push(layer.param_grads(cache.inputs[k].view(), g.view()));
            let mut gi = layer.input_grad(g.view());
            if k > 0 {
                Zip::from(&mut gi).and(&cache.pre[k - 1]).for_each(|g, z| {
                    if *z <= 0.0 {
                        *g = 0.0;
                    }
                });
            }
            g = gi;
        }
        grads.reverse();
        let grad_action = g.slice(s![.., self.obs_dim..]).to_owned();
        Ok((CriticGrads { layers: grads }, grad_action))
    }
}

impl ParamSet for CriticNet {
    fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.slices()).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.slices_mut()).collect()
    }
}
