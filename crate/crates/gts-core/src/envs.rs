//! Task-parameterized desk-scale environments.
//!
//! Two environments are provided: a 2D point navigation task (move from the
//! origin to a goal position, reward is the negative distance to the goal)
//! and a 1D point-mass velocity task (track a target velocity under linear
//! drag). The velocity dynamics are tuned so that the hardest in-bounds
//! target is reachable, but only with sustained near-maximal action over a
//! large fraction of the horizon.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::Trajectory;
use crate::nn::PolicyParams;
use crate::task_space::TaskParam;

/// 2D navigation agent state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NavState {
    pub position: [f64; 2],
}

/// 1D velocity agent state. `alive` drops irreversibly once the speed
/// exceeds the failure threshold; the survive bonus stops with it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelState {
    pub velocity: f64,
    pub alive: bool,
}

/// Environment descriptor, serialized into checkpoints and config echoes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EnvSpec {
    Navigation2d {
        horizon: usize,
        /// Per-component action clip.
        action_limit: f64,
        /// Episode ends early when the goal is closer than this.
        goal_tolerance: f64,
    },
    Velocity1d {
        horizon: usize,
        action_limit: f64,
        dt: f64,
        gain: f64,
        drag: f64,
        /// Speed beyond which the agent counts as having failed to run.
        fail_speed: f64,
    },
}

impl EnvSpec {
    pub fn navigation2d(horizon: usize) -> Self {
        EnvSpec::Navigation2d { horizon, action_limit: 0.1, goal_tolerance: 0.01 }
    }

    /// Velocity surrogate sized to the training distribution: the failure
    /// threshold scales with the largest trained target.
    pub fn velocity1d(horizon: usize, tau_max: f64) -> Self {
        EnvSpec::Velocity1d {
            horizon,
            action_limit: 1.0,
            dt: 0.05,
            gain: 2.0,
            drag: 0.5,
            fail_speed: 2.0 * tau_max.abs().max(1.0),
        }
    }

    pub fn horizon(&self) -> usize {
        match *self {
            EnvSpec::Navigation2d { horizon, .. } => horizon,
            EnvSpec::Velocity1d { horizon, .. } => horizon,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            EnvSpec::Navigation2d { .. } => 2,
            EnvSpec::Velocity1d { .. } => 1,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.state_dim()
    }

    pub fn task_dim(&self) -> usize {
        self.state_dim()
    }

    pub fn kind_str(&self) -> &'static str {
        match self {
            EnvSpec::Navigation2d { .. } => "navigation2d",
            EnvSpec::Velocity1d { .. } => "velocity1d",
        }
    }
}

/// One navigation step: clip the velocity command, move, then score the new
/// position by its negative distance to the goal. The episode is done when
/// that distance falls under the tolerance.
pub fn nav_step(
    state: NavState,
    action: [f64; 2],
    goal: &TaskParam,
    action_limit: f64,
    goal_tolerance: f64,
) -> (NavState, f64, bool) {
    let ax = action[0].clamp(-action_limit, action_limit);
    let ay = action[1].clamp(-action_limit, action_limit);
    let position = [state.position[0] + ax, state.position[1] + ay];
    let g = goal.components();
    let dist = ((position[0] - g[0]).powi(2) + (position[1] - g[1]).powi(2)).sqrt();
    (NavState { position }, -dist, dist < goal_tolerance)
}

/// One velocity step. The tracking reward is evaluated at the incoming
/// velocity, then the point mass integrates `dv = dt (gain a - drag v)`.
/// The survive bonus is paid only while the agent has not failed; failure
/// (exceeding `fail_speed` in either direction) is checked on the new
/// velocity and is irreversible within the episode.
pub fn vel_step(state: VelState, action: f64, v_target: f64, spec: &EnvSpec) -> (VelState, f64) {
    let (action_limit, dt, gain, drag, fail_speed) = match *spec {
        EnvSpec::Velocity1d { action_limit, dt, gain, drag, fail_speed, .. } => {
            (action_limit, dt, gain, drag, fail_speed)
        }
        _ => unreachable!("vel_step on a non-velocity spec"),
    };
    let a = action.clamp(-action_limit, action_limit);
    let r_survive = if state.alive { 0.05 } else { 0.0 };
    let r_action = -0.01 * a * a;
    let reward = -(state.velocity - v_target).abs() + 1.0 + r_survive + r_action;
    let velocity = state.velocity + dt * (gain * a - drag * state.velocity);
    let alive = state.alive && velocity.abs() <= fail_speed;
    (VelState { velocity, alive }, reward)
}

/// Collect one episode of at most `horizon` steps under the Gaussian policy.
/// Actions are recorded as sampled (before the environment clips them) so
/// their log densities match the sampling distribution.
pub fn rollout<R: rand::Rng + ?Sized>(
    spec: &EnvSpec,
    params: &PolicyParams,
    task: &TaskParam,
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    if task.dim() != spec.task_dim() {
        return Err(Error::Input(format!(
            "task dimension {} does not match {} environment",
            task.dim(),
            spec.kind_str()
        )));
    }
    let mut traj = Trajectory::new(*task);

    match spec {
        EnvSpec::Navigation2d { action_limit, goal_tolerance, .. } => {
            let mut state = NavState { position: [0.0, 0.0] };
            for step in 0..horizon {
                let obs = state.position.to_vec();
                let action = params.sample_action(&obs, rng);
                check_finite(&action, task, step)?;
                let (next, reward, done) =
                    nav_step(state, [action[0], action[1]], task, *action_limit, *goal_tolerance);
                traj.push(obs, action, reward);
                state = next;
                if !state.position.iter().all(|v| v.is_finite()) {
                    return Err(Error::Run(format!(
                        "non-finite state for task {task:?} at step {step}"
                    )));
                }
                if done {
                    break;
                }
            }
        }
        EnvSpec::Velocity1d { .. } => {
            let v_target = task.components()[0];
            let mut state = VelState { velocity: 0.0, alive: true };
            for step in 0..horizon {
                let obs = vec![state.velocity];
                let action = params.sample_action(&obs, rng);
                check_finite(&action, task, step)?;
                let (next, reward) = vel_step(state, action[0], v_target, spec);
                traj.push(obs, action, reward);
                state = next;
                if !state.velocity.is_finite() {
                    return Err(Error::Run(format!(
                        "non-finite state for task {task:?} at step {step}"
                    )));
                }
            }
        }
    }
    Ok(traj)
}

fn check_finite(action: &[f64], task: &TaskParam, step: usize) -> Result<()> {
    if action.iter().all(|a| a.is_finite()) {
        Ok(())
    } else {
        Err(Error::Run(format!("non-finite action for task {task:?} at step {step}")))
    }
}
