//! Gradient-based meta-learning core.
//!
//! The inner loop adapts the meta-policy to one task with a single
//! REINFORCE step computed from fresh rollouts; the outer loop accumulates
//! post-adaptation policy gradients across the task batch and applies them
//! to the meta-parameters (first-order approximation: the gradient is taken
//! at the adapted parameters). The meta-policy itself is never mutated in
//! place, so per-task evaluations cannot leak state into each other.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envs::{rollout, EnvSpec};
use crate::error::{Error, Result};
use crate::nn::PolicyParams;
use crate::region::Region;
use crate::rng::{derive_rng, stream};
use crate::sampler::SamplingPlan;
use crate::task_space::TaskParam;

/// Gradient-norm clip applied to both the inner and the outer update.
pub const GRAD_CLIP: f64 = 10.0;

/// One collected episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub task: TaskParam,
}

impl Trajectory {
    pub fn new(task: TaskParam) -> Self {
        Self { states: Vec::new(), actions: Vec::new(), rewards: Vec::new(), task }
    }

    pub fn push(&mut self, state: Vec<f64>, action: Vec<f64>, reward: f64) {
        self.states.push(state);
        self.actions.push(action);
        self.rewards.push(reward);
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    /// Undiscounted episode return (the scoring quantity).
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Step sizes and rollout budget for both loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    /// Inner (adaptation) step size.
    pub alpha: f64,
    /// Outer (meta) step size.
    pub beta: f64,
    /// Rollouts per task per gradient estimate.
    pub n_samples: usize,
    pub horizon: usize,
    /// Discount used inside the learning loss; scores stay undiscounted.
    pub discount: f64,
}

/// Discounted return-to-go sequence of one reward trace.
pub fn returns_to_go(rewards: &[f64], discount: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + discount * acc;
        out[t] = acc;
    }
    out
}

/// Per-timestep mean of returns across the trajectory batch, used as the
/// REINFORCE baseline. Timestep `t` averages over the trajectories that are
/// still running at `t`.
fn batch_baseline(returns: &[Vec<f64>]) -> Vec<f64> {
    let max_len = returns.iter().map(Vec::len).max().unwrap_or(0);
    let mut baseline = vec![0.0; max_len];
    for (t, b) in baseline.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut n = 0usize;
        for g in returns {
            if t < g.len() {
                sum += g[t];
                n += 1;
            }
        }
        if n > 0 {
            *b = sum / n as f64;
        }
    }
    baseline
}

/// Negative REINFORCE objective: the mean over trajectories of
/// `sum_t [-log pi(a_t | s_t) * (G_t - b_t)]`.
pub fn policy_loss(params: &PolicyParams, trajectories: &[Trajectory], discount: f64) -> Result<f64> {
    let (loss, _) = loss_inner(params, trajectories, discount, false)?;
    Ok(loss)
}

/// Loss together with its exact gradient in the flat parameter vector.
pub fn policy_loss_grad(
    params: &PolicyParams,
    trajectories: &[Trajectory],
    discount: f64,
) -> Result<(f64, Vec<f64>)> {
    let (loss, grad) = loss_inner(params, trajectories, discount, true)?;
    Ok((loss, grad.unwrap()))
}

fn loss_inner(
    params: &PolicyParams,
    trajectories: &[Trajectory],
    discount: f64,
    with_grad: bool,
) -> Result<(f64, Option<Vec<f64>>)> {
    if trajectories.is_empty() {
        return Err(Error::Input("policy loss over zero trajectories".into()));
    }
    let returns: Vec<Vec<f64>> = trajectories
        .iter()
        .map(|t| returns_to_go(&t.rewards, discount))
        .collect();
    let baseline = batch_baseline(&returns);
    let n = trajectories.len() as f64;

    let mut loss = 0.0;
    let mut grad = if with_grad { Some(vec![0.0; params.arch.n_params()]) } else { None };
    for (traj, g) in trajectories.iter().zip(&returns) {
        for t in 0..traj.len() {
            let adv = g[t] - baseline[t];
            let scale = -adv / n;
            let lp = match &mut grad {
                Some(buf) => {
                    params.accumulate_log_prob_grad(&traj.states[t], &traj.actions[t], scale, buf)
                }
                None => params.log_prob(&traj.states[t], &traj.actions[t]),
            };
            loss += scale * lp;
        }
    }
    Ok((loss, grad))
}

/// Scale `grad` down to `max_norm` if it exceeds it. Returns the pre-clip norm.
pub fn clip_gradient(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in grad.iter_mut() {
            *g *= s;
        }
    }
    norm
}

/// One plain gradient step on a flat vector.
pub fn gradient_step(theta: &[f64], grad: &[f64], step: f64) -> Vec<f64> {
    theta.iter().zip(grad).map(|(t, g)| t - step * g).collect()
}

/// Inner-loop adaptation: one policy-gradient step toward `task`, estimated
/// from `n_samples` fresh rollouts under the unmodified meta-policy.
pub fn adapt(
    params: &PolicyParams,
    task: &TaskParam,
    config: &MetaConfig,
    env: &EnvSpec,
    rng: &mut ChaCha8Rng,
) -> Result<PolicyParams> {
    let trajectories: Vec<Trajectory> = (0..config.n_samples)
        .map(|_| rollout(env, params, task, config.horizon, rng))
        .collect::<Result<_>>()?;
    let (loss, mut grad) = policy_loss_grad(params, &trajectories, config.discount)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Run(format!(
            "non-finite adaptation gradient for task {task:?} (loss {loss})"
        )));
    }
    clip_gradient(&mut grad, GRAD_CLIP);
    Ok(PolicyParams {
        arch: params.arch,
        theta: gradient_step(&params.theta, &grad, config.alpha),
    })
}

/// Post-adaptation result for one task of a batch.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task: TaskParam,
    pub region: Region,
    /// Mean total (undiscounted) reward over the post-adaptation rollouts.
    pub r_mean: f64,
}

fn task_path(tag: u64, epoch: u32, task: &TaskParam) -> [u64; 4] {
    let c = task.components();
    let c1 = if c.len() > 1 { c[1] } else { 0.0 };
    [tag, epoch as u64, c[0].to_bits(), c1.to_bits()]
}

/// One meta-epoch over a task batch: adapt to each task, roll out the
/// adapted policy, and apply the accumulated post-adaptation gradient to the
/// meta-parameters (first-order, evaluated at the adapted parameters).
///
/// Rollout randomness derives from `(seed, epoch, task value)`, so per-task
/// scores do not depend on batch order and the whole update is reproducible
/// under any rollout parallelism. Tasks whose rollouts fail are skipped with
/// a warning; the update errors only if every task fails.
pub fn meta_update(
    params: &PolicyParams,
    batch: &SamplingPlan,
    config: &MetaConfig,
    env: &EnvSpec,
    seed: u64,
    epoch: u32,
) -> Result<(PolicyParams, Vec<TaskOutcome>)> {
    if batch.tasks.is_empty() {
        return Err(Error::Input("meta update over an empty batch".into()));
    }

    let per_task: Vec<Result<(TaskOutcome, Vec<f64>)>> = batch
        .tasks
        .par_iter()
        .map(|(task, region)| {
            let mut adapt_rng =
                derive_rng(seed, &task_path(stream::ADAPT_ROLLOUT, epoch, task));
            let adapted = adapt(params, task, config, env, &mut adapt_rng)?;

            let mut post_rng = derive_rng(seed, &task_path(stream::POST_ROLLOUT, epoch, task));
            let post: Vec<Trajectory> = (0..config.n_samples)
                .map(|_| rollout(env, &adapted, task, config.horizon, &mut post_rng))
                .collect::<Result<_>>()?;
            let (_, grad) = policy_loss_grad(&adapted, &post, config.discount)?;
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Run(format!(
                    "non-finite meta gradient for task {task:?}"
                )));
            }
            let totals: Vec<f64> = post.iter().map(Trajectory::total_reward).collect();
            let r_mean = crate::score::mean_total_reward(&totals)?;
            Ok((TaskOutcome { task: *task, region: *region, r_mean }, grad))
        })
        .collect();

    let mut outcomes = Vec::with_capacity(batch.tasks.len());
    let mut total_grad = vec![0.0; params.arch.n_params()];
    for result in per_task {
        match result {
            Ok((outcome, grad)) => {
                for (acc, g) in total_grad.iter_mut().zip(&grad) {
                    *acc += g;
                }
                outcomes.push(outcome);
            }
            Err(e) => log::warn!("task excluded from meta update: {e}"),
        }
    }
    if outcomes.is_empty() {
        return Err(Error::Run("every task in the batch failed".into()));
    }
    clip_gradient(&mut total_grad, GRAD_CLIP);
    let theta = gradient_step(&params.theta, &total_grad, config.beta);
    Ok((PolicyParams { arch: params.arch, theta }, outcomes))
}
