use super::{CmdpSpec, Trajectory};
use crate::error::{Error, Result};
use crate::nn::{GaussianPolicy, Matrix};
use crate::rng::{substream, Prng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// Sample `a ~ π(·|s)`.
    Stochastic,
    /// Act with the policy mean.
    Mean,
}

/// Anything that emits an action per state.
pub trait Actor<T: Scalar> {
    /// Called once at episode start, before the first action.
    fn reset(&mut self, _rng: &mut Prng) {}

    fn act(&mut self, state: &[T], rng: &mut Prng) -> Result<Vec<T>>;
}

struct PolicyActor<'a, T> {
    policy: &'a GaussianPolicy<T>,
    mode: RolloutMode,
}

impl<T: Scalar> Actor<T> for PolicyActor<'_, T> {
    fn act(&mut self, state: &[T], rng: &mut Prng) -> Result<Vec<T>> {
        let mean = self.policy.forward_mean(state)?;
        Ok(match self.mode {
            RolloutMode::Mean => mean,
            RolloutMode::Stochastic => self.policy.sample_at_mean(&mean, rng),
        })
    }
}

fn episode_rng<T>(env: &CmdpSpec<T>, seed: u64) -> Prng {
    substream(env.seed, seed)
}

fn check_dims<T: Scalar>(env: &CmdpSpec<T>, policy: &GaussianPolicy<T>) -> Result<()> {
    if policy.state_dim() != env.state_dim {
        return Err(Error::dims("policy state dim vs env", env.state_dim, policy.state_dim()));
    }
    if policy.action_dim() != env.action_dim {
        return Err(Error::dims("policy action dim vs env", env.action_dim, policy.action_dim()));
    }
    Ok(())
}

/// Runs one full-horizon episode with `actor`, starting from `start` when
/// given and from `μ₀` otherwise.
pub fn run_episode<T: Scalar, A: Actor<T> + ?Sized>(
    env: &CmdpSpec<T>,
    actor: &mut A,
    start: Option<Vec<T>>,
    seed: u64,
    id: usize,
) -> Result<Trajectory<T>> {
    let mut rng = episode_rng(env, seed);
    let mut state = match start {
        Some(s) => s,
        None => env.sample_initial_state(&mut rng),
    };
    if state.len() != env.state_dim {
        return Err(Error::dims("start state", env.state_dim, state.len()));
    }
    actor.reset(&mut rng);
    let horizon = env.horizon;
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    let mut costs = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let raw = actor.act(&state, &mut rng)?;
        if raw.len() != env.action_dim {
            return Err(Error::dims("actor action", env.action_dim, raw.len()));
        }
        let action = env.clip_action(&raw);
        rewards.push(env.reward(&state, &action));
        costs.push(env.cost(&state, &action));
        let next = env.transition(&state, &action, &mut rng);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::RolloutDiverged { step });
        }
        states.push(std::mem::replace(&mut state, next));
        actions.push(action);
    }
    states.push(state);
    Trajectory::new(id, states, actions, rewards, costs)
}

pub fn rollout<T: Scalar>(
    env: &CmdpSpec<T>,
    policy: &GaussianPolicy<T>,
    mode: RolloutMode,
    seed: u64,
) -> Result<Trajectory<T>> {
    rollout_from(env, policy, mode, None, seed)
}

pub fn rollout_from<T: Scalar>(
    env: &CmdpSpec<T>,
    policy: &GaussianPolicy<T>,
    mode: RolloutMode,
    start: Option<Vec<T>>,
    seed: u64,
) -> Result<Trajectory<T>> {
    check_dims(env, policy)?;
    run_episode(env, &mut PolicyActor { policy, mode }, start, seed, 0)
}

/// Runs one episode per seed in lockstep, batching the policy forward pass.
///
/// Each episode owns its generator, so the result equals calling
/// [`rollout`] once per seed.
pub fn rollout_many<T: Scalar>(
    env: &CmdpSpec<T>,
    policy: &GaussianPolicy<T>,
    mode: RolloutMode,
    seeds: &[u64],
) -> Result<Vec<Trajectory<T>>> {
    check_dims(env, policy)?;
    let n = seeds.len();
    let mut rngs: Vec<Prng> = seeds.iter().map(|&s| episode_rng(env, s)).collect();
    let mut current: Vec<Vec<T>> = rngs.iter_mut().map(|r| env.sample_initial_state(r)).collect();
    let horizon = env.horizon;
    let mut states: Vec<Vec<Vec<T>>> = vec![Vec::with_capacity(horizon + 1); n];
    let mut actions: Vec<Vec<Vec<T>>> = vec![Vec::with_capacity(horizon); n];
    let mut rewards: Vec<Vec<T>> = vec![Vec::with_capacity(horizon); n];
    let mut costs: Vec<Vec<T>> = vec![Vec::with_capacity(horizon); n];
    for step in 0..horizon {
        let batch = Matrix::from_rows(&current, env.state_dim)?;
        let means = policy.mean_batch(&batch)?;
        for i in 0..n {
            let mean = means.row(i);
            let raw = match mode {
                RolloutMode::Mean => mean.to_vec(),
                RolloutMode::Stochastic => policy.sample_at_mean(mean, &mut rngs[i]),
            };
            let action = env.clip_action(&raw);
            let s = &current[i];
            rewards[i].push(env.reward(s, &action));
            costs[i].push(env.cost(s, &action));
            let next = env.transition(s, &action, &mut rngs[i]);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::RolloutDiverged { step });
            }
            states[i].push(std::mem::replace(&mut current[i], next));
            actions[i].push(action);
        }
    }
    let mut out = Vec::with_capacity(n);
    for (i, (((mut st, ac), rw), cs)) in states
        .into_iter()
        .zip(actions)
        .zip(rewards)
        .zip(costs)
        .enumerate()
    {
        st.push(current[i].clone());
        out.push(Trajectory::new(i, st, ac, rw, cs)?);
    }
    Ok(out)
}
