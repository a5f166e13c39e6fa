//! Toy constrained MDPs, rollouts and offline dataset synthesis.
//!
//! Both environments score reward and cost on the noise-free successor of
//! `(s, a)`, so `r` and `c` are deterministic functions of the state-action
//! pair. Costs are indicators in `[0, 1]`.

mod controllers;
mod rollout;
mod synth;
mod trajectory;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use controllers::{Behavior, Controller};
pub use rollout::{rollout, rollout_from, rollout_many, run_episode, Actor, RolloutMode};
pub use synth::{default_mix, synthesize_dataset};
pub use trajectory::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EnvName {
    SpeedLimit1D,
    HazardNav2D,
}

impl EnvName {
    pub const ALL: [EnvName; 2] = [EnvName::SpeedLimit1D, EnvName::HazardNav2D];

    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::SpeedLimit1D => "speedlimit1d",
            EnvName::HazardNav2D => "hazardnav2d",
        }
    }

    /// Cost thresholds used when none are given: `{10, 15, 20}` for the
    /// 100-step speed task, `{2, 3, 4}` for the 60-step navigation task.
    pub fn default_taus(self) -> [f64; 3] {
        match self {
            EnvName::SpeedLimit1D => [10.0, 15.0, 20.0],
            EnvName::HazardNav2D => [2.0, 3.0, 4.0],
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        EnvName::ALL
            .into_iter()
            .find(|n| n.as_str() == key)
            .ok_or_else(|| Error::UnknownEnv {
                name: s.to_string(),
                valid: EnvName::ALL.map(EnvName::as_str).join(", "),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Dynamics<T> {
    SpeedLimit {
        dt: T,
        drag: T,
        v_limit: T,
        init_speed_max: T,
    },
    HazardNav {
        goal: [T; 2],
        hazards: Vec<[T; 2]>,
        radius: T,
        bound: T,
        start: [T; 2],
        start_jitter: T,
    },
}

/// A constrained MDP `(S, A, T, r, c, μ₀, γ)` with box action bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CmdpSpec<T> {
    pub name: EnvName,
    pub state_dim: usize,
    pub action_dim: usize,
    pub action_low: Vec<T>,
    pub action_high: Vec<T>,
    pub horizon: usize,
    pub gamma: T,
    pub cost_max: T,
    /// Std of additive Gaussian noise on the successor state.
    pub transition_noise: T,
    pub seed: u64,
    pub(crate) dynamics: Dynamics<T>,
}

pub fn make_env<T: Scalar>(name: EnvName, seed: u64) -> CmdpSpec<T> {
    let l = T::lit;
    match name {
        EnvName::SpeedLimit1D => CmdpSpec {
            name,
            state_dim: 2,
            action_dim: 1,
            action_low: vec![l(-1.0)],
            action_high: vec![l(1.0)],
            horizon: 100,
            gamma: l(0.99),
            cost_max: l(1.0),
            transition_noise: l(0.0),
            seed,
            dynamics: Dynamics::SpeedLimit {
                dt: l(0.1),
                drag: l(0.05),
                v_limit: l(1.0),
                init_speed_max: l(0.1),
            },
        },
        EnvName::HazardNav2D => CmdpSpec {
            name,
            state_dim: 2,
            action_dim: 2,
            action_low: vec![l(-0.2); 2],
            action_high: vec![l(0.2); 2],
            horizon: 60,
            gamma: l(0.99),
            cost_max: l(1.0),
            transition_noise: l(0.01),
            seed,
            dynamics: Dynamics::HazardNav {
                goal: [l(1.5), l(1.5)],
                hazards: vec![[l(0.0), l(0.0)], [l(0.8), l(0.3)], [l(0.3), l(1.0)]],
                radius: l(0.35),
                bound: l(2.0),
                start: [l(-1.5), l(-1.5)],
                start_jitter: l(0.1),
            },
        },
    }
}

/// Parses a name and builds the environment.
pub fn make_env_by_name<T: Scalar>(name: &str, seed: u64) -> Result<CmdpSpec<T>> {
    Ok(make_env(name.parse()?, seed))
}

impl<T: Scalar> CmdpSpec<T> {
    pub fn with_transition_noise(mut self, std: T) -> Self {
        self.transition_noise = std;
        self
    }

    /// Speed limit of the speed task, `None` for other environments.
    pub fn speed_limit(&self) -> Option<T> {
        match self.dynamics {
            Dynamics::SpeedLimit { v_limit, .. } => Some(v_limit),
            _ => None,
        }
    }

    pub fn goal(&self) -> Option<[T; 2]> {
        match self.dynamics {
            Dynamics::HazardNav { goal, .. } => Some(goal),
            _ => None,
        }
    }

    pub fn hazards(&self) -> Option<(&[[T; 2]], T)> {
        match &self.dynamics {
            Dynamics::HazardNav {
                hazards, radius, ..
            } => Some((hazards, *radius)),
            _ => None,
        }
    }

    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match &self.dynamics {
            Dynamics::SpeedLimit { init_speed_max, .. } => {
                let u: f64 = rng.random();
                vec![T::zero(), *init_speed_max * T::lit(u)]
            }
            Dynamics::HazardNav {
                start,
                start_jitter,
                ..
            } => start
                .iter()
                .map(|&c| {
                    let u: f64 = rng.random_range(-1.0..1.0);
                    c + *start_jitter * T::lit(u)
                })
                .collect(),
        }
    }

    pub fn clip_action(&self, action: &[T]) -> Vec<T> {
        action
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .map(|(&a, (&lo, &hi))| a.max(lo).min(hi))
            .collect()
    }

    /// Noise-free successor of `(s, a)`; `a` is assumed clipped.
    pub fn next_mean(&self, state: &[T], action: &[T]) -> Vec<T> {
        match &self.dynamics {
            Dynamics::SpeedLimit { dt, drag, .. } => {
                let (pos, vel) = (state[0], state[1]);
                let new_pos = pos + vel * *dt;
                let new_vel = vel + action[0] * *dt - *drag * vel * *dt;
                vec![new_pos, new_vel]
            }
            Dynamics::HazardNav { bound, .. } => state
                .iter()
                .zip(action)
                .map(|(&s, &a)| (s + a).max(-*bound).min(*bound))
                .collect(),
        }
    }

    pub fn transition<R: Rng + ?Sized>(&self, state: &[T], action: &[T], rng: &mut R) -> Vec<T> {
        let mut next = self.next_mean(state, action);
        if self.transition_noise > T::zero() {
            for v in next.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v += self.transition_noise * T::lit(z);
            }
            if let Dynamics::HazardNav { bound, .. } = &self.dynamics {
                for v in next.iter_mut() {
                    *v = v.max(-*bound).min(*bound);
                }
            }
        }
        next
    }

    /// Speed task: successor velocity. Navigation: minus the successor's
    /// distance to the goal.
    pub fn reward(&self, state: &[T], action: &[T]) -> T {
        let next = self.next_mean(state, action);
        match &self.dynamics {
            Dynamics::SpeedLimit { .. } => next[1],
            Dynamics::HazardNav { goal, .. } => -dist(&next, goal),
        }
    }

    /// Indicator of the successor violating the constraint, in `[0, cost_max]`.
    pub fn cost(&self, state: &[T], action: &[T]) -> T {
        let next = self.next_mean(state, action);
        let violated = match &self.dynamics {
            Dynamics::SpeedLimit { v_limit, .. } => next[1] > *v_limit,
            Dynamics::HazardNav {
                hazards, radius, ..
            } => hazards.iter().any(|h| dist(&next, h) < *radius),
        };
        let c = if violated { T::one() } else { T::zero() };
        c.max(T::zero()).min(self.cost_max)
    }
}

fn dist<T: Scalar>(a: &[T], b: &[T; 2]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names_and_reject_unknown() {
        assert_eq!("SpeedLimit1D".parse::<EnvName>().unwrap(), EnvName::SpeedLimit1D);
        assert_eq!("hazard-nav-2d".parse::<EnvName>().unwrap(), EnvName::HazardNav2D);
        let err = "cartpole".parse::<EnvName>().unwrap_err().to_string();
        assert!(err.contains("speedlimit1d") && err.contains("hazardnav2d"), "{err}");
    }

    #[test]
    fn speed_dynamics_follow_the_stated_update() {
        let env = make_env::<f64>(EnvName::SpeedLimit1D, 0);
        let next = env.next_mean(&[2.0, 0.5], &[1.0]);
        assert!((next[0] - 2.05).abs() < 1e-15);
        assert!((next[1] - (0.5 + 0.1 - 0.05 * 0.5 * 0.1)).abs() < 1e-15);
        assert_eq!(env.cost(&[0.0, 0.95], &[1.0]), 1.0);
        assert_eq!(env.cost(&[0.0, 0.5], &[1.0]), 0.0);
    }

    #[test]
    fn hazard_cost_inside_circles_only() {
        let env = make_env::<f64>(EnvName::HazardNav2D, 0);
        assert_eq!(env.cost(&[0.1, 0.0], &[0.0, 0.0]), 1.0);
        assert_eq!(env.cost(&[0.8, 0.5], &[0.0, 0.0]), 1.0);
        assert_eq!(env.cost(&[1.5, 1.5], &[0.0, 0.0]), 0.0);
        assert_eq!(env.reward(&[1.5, 1.5], &[0.0, 0.0]), 0.0);
        assert_eq!(env.clip_action(&[0.5, -0.7]), vec![0.2, -0.2]);
    }
}
