use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One episode: `states` has one more entry than the per-step lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub id: usize,
    pub states: Vec<Vec<T>>,
    pub actions: Vec<Vec<T>>,
    pub rewards: Vec<T>,
    pub costs: Vec<T>,
    pub cumulative_reward: T,
    pub cumulative_cost: T,
}

impl<T: Scalar> Trajectory<T> {
    /// Validates the length invariant and computes the undiscounted aggregates.
    pub fn new(
        id: usize,
        states: Vec<Vec<T>>,
        actions: Vec<Vec<T>>,
        rewards: Vec<T>,
        costs: Vec<T>,
    ) -> Result<Self> {
        let steps = actions.len();
        if rewards.len() != steps {
            return Err(Error::dims("trajectory rewards", steps, rewards.len()));
        }
        if costs.len() != steps {
            return Err(Error::dims("trajectory costs", steps, costs.len()));
        }
        if states.len() != steps + 1 {
            return Err(Error::dims("trajectory states", steps + 1, states.len()));
        }
        if let Some(first) = states.first() {
            let sd = first.len();
            if let Some(bad) = states.iter().find(|s| s.len() != sd) {
                return Err(Error::dims("trajectory state width", sd, bad.len()));
            }
        }
        if let Some(first) = actions.first() {
            let ad = first.len();
            if let Some(bad) = actions.iter().find(|a| a.len() != ad) {
                return Err(Error::dims("trajectory action width", ad, bad.len()));
            }
        }
        let cumulative_reward = rewards.iter().copied().sum();
        let cumulative_cost = costs.iter().copied().sum();
        Ok(Self {
            id,
            states,
            actions,
            rewards,
            costs,
            cumulative_reward,
            cumulative_cost,
        })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn action_dim(&self) -> usize {
        self.actions.first().map_or(0, Vec::len)
    }

    /// `(s_t, a_t)` pairs, excluding the terminal state.
    pub fn steps(&self) -> impl Iterator<Item = (&[T], &[T])> {
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(s, a)| (s.as_slice(), a.as_slice()))
    }
}
