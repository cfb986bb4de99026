//! Independent reference computations shared by the integration suites.
#![allow(dead_code)]

use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Population mean and variance by two passes with compensated sums.
pub fn brute_stats(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = kahan(xs.iter().copied()) / n;
    let var = kahan(xs.iter().map(|x| (x - mean) * (x - mean))) / n;
    (mean, var)
}

pub fn kahan(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in it {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Relative error `|a − b| / max(|b|, floor)`.
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

/// Norm-wise relative error `‖a − b‖₂ / max(‖a‖₂, ‖b‖₂, floor)`.
pub fn rel_vec(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    d / na.max(nb).max(floor)
}

/// Central finite differences of `f` at `x`, one coordinate at a time.
pub fn fd_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Grid `K ∈ {0, 0.05, …, 1}` minimizing the Monte-Carlo MSE of
/// `(1 − K)·prior + K·batch`, where the two estimates carry independent
/// Gaussian errors of variance `a` and `b` around a common truth.
pub fn mc_best_gain<R: Rng>(a: f64, b: f64, trials: usize, rng: &mut R) -> f64 {
    let ea = Normal::new(0.0, a.sqrt()).unwrap();
    let eb = Normal::new(0.0, b.sqrt()).unwrap();
    let truth = 0.7;
    let pairs: Vec<(f64, f64)> = (0..trials).map(|_| (truth + ea.sample(rng), truth + eb.sample(rng))).collect();
    let mut best = (f64::INFINITY, 0.0);
    for k in 0..=20 {
        let gain = k as f64 * 0.05;
        let mse = pairs
            .iter()
            .map(|(p, q)| ((1.0 - gain) * p + gain * q - truth).powi(2))
            .sum::<f64>()
            / trials as f64;
        if mse < best.0 {
            best = (mse, gain);
        }
    }
    best.1
}
