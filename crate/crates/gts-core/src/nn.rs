//! Small feed-forward Gaussian policy over a flat parameter vector.
//!
//! The network is two tanh hidden layers with a linear mean head; the
//! per-dimension log standard deviation is a learned parameter appended to
//! the flat vector. Differentiation is reverse mode by hand: the forward
//! pass caches layer activations and the backward pass accumulates exact
//! gradients into a caller-supplied buffer. No external learning framework
//! is involved, so gradients are easy to check against finite differences.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_2PI: f64 = 1.8378770664093453;

/// Network shape: `input -> hidden -> hidden -> output` mean head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
}

impl Architecture {
    pub fn new(input: usize, hidden: usize, output: usize) -> Self {
        Self { input, hidden, output }
    }

    /// Number of weight and bias entries (excluding log-std).
    pub fn n_weights(&self) -> usize {
        let (i, h, o) = (self.input, self.hidden, self.output);
        h * i + h + h * h + h + o * h + o
    }

    /// Full flat parameter count including the log-std tail.
    pub fn n_params(&self) -> usize {
        self.n_weights() + self.output
    }

    // Offsets into the flat vector.
    fn w1(&self) -> usize {
        0
    }
    fn b1(&self) -> usize {
        self.hidden * self.input
    }
    fn w2(&self) -> usize {
        self.b1() + self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.hidden * self.hidden
    }
    fn w3(&self) -> usize {
        self.b2() + self.hidden
    }
    fn b3(&self) -> usize {
        self.w3() + self.output * self.hidden
    }
    fn log_std(&self) -> usize {
        self.b3() + self.output
    }
}

/// Flat parameter vector of the policy (weights, biases, log-std tail).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub arch: Architecture,
    pub theta: Vec<f64>,
}

impl PolicyParams {
    /// Initialize weights and biases uniformly in `±1/sqrt(fan_in)` per
    /// layer; log-std starts at `ln(1.0) = 0`.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Self {
        let mut theta = vec![0.0; arch.n_params()];
        let mut fill = |lo: usize, len: usize, fan_in: usize, rng: &mut R| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in &mut theta[lo..lo + len] {
                *v = rng.gen_range(-bound..bound);
            }
        };
        fill(arch.w1(), arch.hidden * arch.input + arch.hidden, arch.input, rng);
        fill(arch.w2(), arch.hidden * arch.hidden + arch.hidden, arch.hidden, rng);
        fill(arch.w3(), arch.output * arch.hidden + arch.output, arch.hidden, rng);
        // log-std entries stay at 0.0
        Self { arch, theta }
    }

    pub fn from_parts(arch: Architecture, weights: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        if weights.len() != arch.n_weights() || log_std.len() != arch.output {
            return Err(Error::Input("parameter vector does not match architecture".into()));
        }
        let mut theta = weights;
        theta.extend_from_slice(&log_std);
        Ok(Self { arch, theta })
    }

    /// Weight/bias part and log-std tail, split for serialization.
    pub fn split(&self) -> (&[f64], &[f64]) {
        self.theta.split_at(self.arch.n_weights())
    }

    pub fn log_std(&self) -> &[f64] {
        &self.theta[self.arch.log_std()..]
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|v| v.is_finite())
    }

    /// Mean head plus the activation cache needed for the backward pass.
    pub fn forward(&self, state: &[f64]) -> (Vec<f64>, ForwardCache) {
        let a = &self.arch;
        debug_assert_eq!(state.len(), a.input);
        let t = &self.theta;

        let mut a1 = vec![0.0; a.hidden];
        for i in 0..a.hidden {
            let mut z = t[a.b1() + i];
            let row = a.w1() + i * a.input;
            for j in 0..a.input {
                z += t[row + j] * state[j];
            }
            a1[i] = z.tanh();
        }
        let mut a2 = vec![0.0; a.hidden];
        for i in 0..a.hidden {
            let mut z = t[a.b2() + i];
            let row = a.w2() + i * a.hidden;
            for j in 0..a.hidden {
                z += t[row + j] * a1[j];
            }
            a2[i] = z.tanh();
        }
        let mut mean = vec![0.0; a.output];
        for o in 0..a.output {
            let mut z = t[a.b3() + o];
            let row = a.w3() + o * a.hidden;
            for j in 0..a.hidden {
                z += t[row + j] * a2[j];
            }
            mean[o] = z;
        }
        let cache = ForwardCache { state: state.to_vec(), a1, a2 };
        (mean, cache)
    }

    /// Accumulate `d_mean^T * d(mean)/d(theta)` into `grad` (which must span
    /// the full flat vector). The log-std tail is untouched here; its
    /// gradient has no network dependence and is added by the caller.
    pub fn backward(&self, cache: &ForwardCache, d_mean: &[f64], grad: &mut [f64]) {
        let a = &self.arch;
        debug_assert_eq!(grad.len(), a.n_params());
        let t = &self.theta;

        let mut da2 = vec![0.0; a.hidden];
        for o in 0..a.output {
            let g = d_mean[o];
            let row = a.w3() + o * a.hidden;
            grad[a.b3() + o] += g;
            for j in 0..a.hidden {
                grad[row + j] += g * cache.a2[j];
                da2[j] += g * t[row + j];
            }
        }
        let mut da1 = vec![0.0; a.hidden];
        for i in 0..a.hidden {
            let dz = da2[i] * (1.0 - cache.a2[i] * cache.a2[i]);
            let row = a.w2() + i * a.hidden;
            grad[a.b2() + i] += dz;
            for j in 0..a.hidden {
                grad[row + j] += dz * cache.a1[j];
                da1[j] += dz * t[row + j];
            }
        }
        for i in 0..a.hidden {
            let dz = da1[i] * (1.0 - cache.a1[i] * cache.a1[i]);
            let row = a.w1() + i * a.input;
            grad[a.b1() + i] += dz;
            for j in 0..a.input {
                grad[row + j] += dz * cache.state[j];
            }
        }
    }

    /// Draw an action from the Gaussian policy at `state`.
    pub fn sample_action<R: Rng + ?Sized>(&self, state: &[f64], rng: &mut R) -> Vec<f64> {
        let (mean, _) = self.forward(state);
        let log_std = self.log_std();
        mean.iter()
            .zip(log_std)
            .map(|(&m, &ls)| m + ls.exp() * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    /// Log density of `action` under the policy at `state`.
    pub fn log_prob(&self, state: &[f64], action: &[f64]) -> f64 {
        let (mean, _) = self.forward(state);
        self.log_prob_with_mean(&mean, action)
    }

    fn log_prob_with_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        let log_std = self.log_std();
        let mut lp = 0.0;
        for d in 0..self.arch.output {
            let sigma = log_std[d].exp();
            let z = (action[d] - mean[d]) / sigma;
            lp += -0.5 * LOG_2PI - log_std[d] - 0.5 * z * z;
        }
        lp
    }

    /// Accumulate `scale * grad_theta log pi(action | state)` into `grad`
    /// and return `log pi(action | state)`.
    pub fn accumulate_log_prob_grad(
        &self,
        state: &[f64],
        action: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> f64 {
        let (mean, cache) = self.forward(state);
        let log_std = self.log_std();
        let mut d_mean = vec![0.0; self.arch.output];
        for d in 0..self.arch.output {
            let sigma = log_std[d].exp();
            let diff = action[d] - mean[d];
            d_mean[d] = scale * diff / (sigma * sigma);
            grad[self.arch.log_std() + d] += scale * (diff * diff / (sigma * sigma) - 1.0);
        }
        self.backward(&cache, &d_mean, grad);
        self.log_prob_with_mean(&mean, action)
    }
}

/// Activations cached by [`PolicyParams::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    state: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
}
