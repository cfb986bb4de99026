//! Leaky integrate-and-fire neurons and the current-based variant.
//!
//! One step of the LIF neuron:
//!
//! ```text
//! H_t = λ·V_{t-1} + C_t
//! S_t = Θ(H_t − V_th)            (Θ(0) = 1)
//! V_t = (1 − S_t)·H_t + S_t·V_reset
//! ```
//!
//! The current-based neuron (CLIF) first low-pass filters its input into a
//! synaptic current, `C_t = decay·C_{t-1} + X_t`, and then takes the LIF step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeuronModel {
    Lif,
    Clif,
}

impl std::str::FromStr for NeuronModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lif" => Ok(NeuronModel::Lif),
            "clif" => Ok(NeuronModel::Clif),
            other => Err(Error::InvalidArgument(format!("unknown neuron model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuronParams {
    pub v_th: f64,
    pub v_reset: f64,
    /// Membrane leak factor λ.
    pub lambda: f64,
    /// Synaptic current decay (CLIF only).
    pub current_decay: f64,
    /// Half-width of the rectangular surrogate window.
    pub surrogate_width: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self { v_th: 1.0, v_reset: 0.0, lambda: 0.75, current_decay: 0.5, surrogate_width: 0.5 }
    }
}

impl NeuronParams {
    pub fn violations(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            out.push(format!("{prefix}lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(self.v_th > self.v_reset) {
            out.push(format!("{prefix}v_th must exceed v_reset"));
        }
        if !(self.surrogate_width > 0.0) {
            out.push(format!("{prefix}surrogate_width must be positive"));
        }
        if !(self.current_decay >= 0.0 && self.current_decay < 1.0) {
            out.push(format!("{prefix}current_decay must lie in [0, 1), got {}", self.current_decay));
        }
        out
    }
}

/// How a membrane potential is turned into a spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpikeFn {
    /// Binary Heaviside spike; the normal forward.
    #[default]
    Heaviside,
    /// Piecewise-linear ramp whose derivative is exactly the rectangular
    /// surrogate. Spikes become real values in [0, 1]. Used to check the
    /// surrogate backward pass against finite differences.
    Relaxed,
}

impl SpikeFn {
    #[inline]
    pub fn fire(self, h: f64, p: &NeuronParams) -> f64 {
        match self {
            SpikeFn::Heaviside => {
                if h >= p.v_th {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Relaxed => {
                let w = p.surrogate_width;
                ((h - p.v_th) / (2.0 * w) + 0.5).clamp(0.0, 1.0)
            }
        }
    }
}

/// Rectangular surrogate for dS/dH: `1/(2w)` inside `|h − v_th| ≤ w`, else 0.
#[inline]
pub fn surrogate_grad(h: f64, p: &NeuronParams) -> f64 {
    let w = p.surrogate_width;
    if (h - p.v_th).abs() <= w {
        0.5 / w
    } else {
        0.0
    }
}

/// Membrane state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    pub v: Vec<f64>,
    /// Synaptic current (CLIF); stays zero for LIF.
    pub c: Vec<f64>,
    /// Spikes from the last step.
    pub s: Vec<f64>,
}

impl NeuronState {
    pub fn new(width: usize, p: &NeuronParams) -> Self {
        Self { v: vec![p.v_reset; width], c: vec![0.0; width], s: vec![0.0; width] }
    }

    pub fn width(&self) -> usize {
        self.v.len()
    }

    pub fn spikes(&self) -> &[f64] {
        &self.s
    }

    fn check(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.width() {
            return Err(Error::dim(self.width(), input.len()));
        }
        if let Some(x) = input.iter().find(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!("neuron input {x}")));
        }
        Ok(())
    }

    /// One LIF step driven by input current `c_t`.
    pub fn lif_step(&mut self, c_t: &[f64], p: &NeuronParams) -> Result<&[f64]> {
        self.check(c_t)?;
        for ((v, s), c) in self.v.iter_mut().zip(&mut self.s).zip(c_t) {
            let h = p.lambda * *v + c;
            let fired = SpikeFn::Heaviside.fire(h, p);
            *v = (1.0 - fired) * h + fired * p.v_reset;
            *s = fired;
        }
        Ok(&self.s)
    }

    /// One CLIF step: decay the synaptic current, add `x_t`, then take the LIF step.
    pub fn clif_step(&mut self, x_t: &[f64], p: &NeuronParams) -> Result<&[f64]> {
        self.check(x_t)?;
        for (c, x) in self.c.iter_mut().zip(x_t) {
            *c = p.current_decay * *c + x;
        }
        let current = std::mem::take(&mut self.c);
        let out = self.lif_step(&current, p).map(|_| ());
        self.c = current;
        out?;
        Ok(&self.s)
    }

    pub fn step(&mut self, model: NeuronModel, input: &[f64], p: &NeuronParams) -> Result<&[f64]> {
        match model {
            NeuronModel::Lif => self.lif_step(input, p),
            NeuronModel::Clif => self.clif_step(input, p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_lif() -> NeuronParams {
        NeuronParams { lambda: 1.0, ..NeuronParams::default() }
    }

    #[test]
    fn hand_simulated_lif_trace() {
        let p = unit_lif();
        let mut st = NeuronState::new(1, &p);
        assert_eq!(st.lif_step(&[0.5], &p).unwrap(), &[0.0]);
        assert_eq!(st.v, vec![0.5]);
        assert_eq!(st.lif_step(&[0.5], &p).unwrap(), &[1.0]);
        assert_eq!(st.v, vec![0.0]);
    }

    #[test]
    fn quiescent_without_input() {
        let p = NeuronParams::default();
        let mut st = NeuronState::new(3, &p);
        for _ in 0..50 {
            assert!(st.lif_step(&[0.0; 3], &p).unwrap().iter().all(|s| *s == 0.0));
        }
        assert_eq!(st.v, vec![0.0; 3]);
    }

    #[test]
    fn saturating_input_spikes_every_step() {
        let p = NeuronParams::default();
        let mut st = NeuronState::new(2, &p);
        for _ in 0..20 {
            assert_eq!(st.lif_step(&[10.0, 50.0], &p).unwrap(), &[1.0, 1.0]);
            assert_eq!(st.v, vec![p.v_reset; 2]);
        }
    }

    #[test]
    fn clif_with_zero_decay_is_lif() {
        let p = NeuronParams { current_decay: 0.0, ..NeuronParams::default() };
        let mut a = NeuronState::new(1, &p);
        let mut b = NeuronState::new(1, &p);
        for x in [0.3, 0.9, -0.2, 1.7, 0.4, 0.6] {
            let sa = a.clif_step(&[x], &p).unwrap().to_vec();
            let sb = b.lif_step(&[x], &p).unwrap().to_vec();
            assert_eq!(sa, sb);
            assert_eq!(a.v, b.v);
        }
    }

    #[test]
    fn clif_current_decays_geometrically() {
        // Threshold out of reach so the current is observable through v with λ=1.
        let p = NeuronParams { current_decay: 0.5, lambda: 1.0, v_th: 1e9, ..NeuronParams::default() };
        let mut st = NeuronState::new(1, &p);
        st.c = vec![1.0];
        let mut expected = 1.0;
        for _ in 0..6 {
            st.clif_step(&[0.0], &p).unwrap();
            expected *= 0.5;
            assert_eq!(st.c[0], expected);
        }
    }

    #[test]
    fn surrogate_shape() {
        let p = NeuronParams::default();
        assert_eq!(surrogate_grad(p.v_th, &p), 1.0 / (2.0 * p.surrogate_width));
        assert_eq!(surrogate_grad(p.v_th + 2.0 * p.surrogate_width, &p), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        let p = NeuronParams::default();
        let mut st = NeuronState::new(2, &p);
        assert!(matches!(st.lif_step(&[f64::NAN, 0.0], &p), Err(Error::Numeric(_))));
        assert!(matches!(st.clif_step(&[0.0], &p), Err(Error::Dimension { .. })));
    }

    #[test]
    fn param_validation() {
        let p = NeuronParams { lambda: 0.0, v_th: 0.0, surrogate_width: 0.0, ..NeuronParams::default() };
        assert_eq!(p.violations("").len(), 3);
        assert!(NeuronParams::default().violations("").is_empty());
    }
}
