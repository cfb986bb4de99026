use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Genuine termination only; time-limit truncation stores `false`.
    pub done: bool,
}

/// Column-stacked sample of transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub states: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_states: Array2<f64>,
    pub dones: Array1<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }
}

/// Fixed-capacity ring buffer with uniform sampling (with replacement).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    action_dim: usize,
    data: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, action_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, obs_dim, action_dim, data: Vec::new(), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> Option<&Transition> {
        self.data.get(i)
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.state.len() != self.obs_dim || t.next_state.len() != self.obs_dim {
            return Err(Error::dim(self.obs_dim, t.state.len().max(t.next_state.len())));
        }
        if t.action.len() != self.action_dim {
            return Err(Error::dim(self.action_dim, t.action.len()));
        }
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Vec<usize>> {
        if n == 0 || self.data.len() < n {
            return Err(Error::Precondition(format!(
                "cannot sample {n} transitions from a buffer of {}",
                self.data.len()
            )));
        }
        Ok((0..n).map(|_| rng.random_range(0..self.data.len())).collect())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Batch> {
        let idx = self.sample_indices(rng, n)?;
        Ok(self.gather(&idx))
    }

    /// States only, for calibration forwards.
    pub fn sample_states<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Result<Array2<f64>> {
        let idx = self.sample_indices(rng, n)?;
        Ok(Array2::from_shape_fn((n, self.obs_dim), |(r, c)| self.data[idx[r]].state[c]))
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let n = idx.len();
        let t = |r: usize| &self.data[idx[r]];
        Batch {
            states: Array2::from_shape_fn((n, self.obs_dim), |(r, c)| t(r).state[c]),
            actions: Array2::from_shape_fn((n, self.action_dim), |(r, c)| t(r).action[c]),
            rewards: Array1::from_shape_fn(n, |r| t(r).reward),
            next_states: Array2::from_shape_fn((n, self.obs_dim), |(r, c)| t(r).next_state[c]),
            dones: Array1::from_shape_fn(n, |r| if t(r).done { 1.0 } else { 0.0 }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(k: f64) -> Transition {
        Transition { state: vec![k, 0.0], action: vec![k], reward: k, next_state: vec![k + 1.0, 0.0], done: false }
    }

    #[test]
    fn ring_overwrites_oldest() {
        let mut b = ReplayBuffer::new(3, 2, 1);
        for k in 0..5 {
            b.push(tr(k as f64)).unwrap();
        }
        assert_eq!(b.len(), 3);
        let rewards: Vec<f64> = (0..3).map(|i| b.get(i).unwrap().reward).collect();
        assert_eq!(rewards, vec![3.0, 4.0, 2.0]);
    }

    #[test]
    fn sampling_needs_enough_data() {
        let mut b = ReplayBuffer::new(10, 2, 1);
        b.push(tr(0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(b.sample(&mut rng, 2), Err(Error::Precondition(_))));
        assert!(b.push(Transition { action: vec![], ..tr(1.0) }).is_err());
    }

    #[test]
    fn gather_stacks_columns() {
        let mut b = ReplayBuffer::new(10, 2, 1);
        for k in 0..4 {
            b.push(tr(k as f64)).unwrap();
        }
        let batch = b.gather(&[2, 0]);
        assert_eq!(batch.rewards.to_vec(), vec![2.0, 0.0]);
        assert_eq!(batch.next_states[[0, 0]], 3.0);
        assert_eq!(batch.dones.to_vec(), vec![0.0, 0.0]);
    }
}
