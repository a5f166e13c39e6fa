use serde::{Deserialize, Serialize};

use super::metrics::{cvar, normalized_cost, normalized_reward, NormalizationStats};
use crate::envs::{rollout_many, CmdpSpec, RolloutMode};
use crate::error::{Error, Result};
use crate::nn::GaussianPolicy;
use crate::scalar::Scalar;

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_CVAR_ALPHA: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub n_rollouts: usize,
    pub epsilon: f64,
    pub cvar_alpha: f64,
    pub stochastic: bool,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_rollouts: 100,
            epsilon: DEFAULT_EPSILON,
            cvar_alpha: DEFAULT_CVAR_ALPHA,
            stochastic: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub normalized_reward: f64,
    pub normalized_cost: f64,
    pub is_safe: bool,
    pub cvar_cost: f64,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub n_rollouts: usize,
    pub rollout_rewards: Vec<f64>,
    pub rollout_costs: Vec<f64>,
    pub seeds: Vec<u64>,
    pub kappa: f64,
    pub epsilon: f64,
    pub cvar_alpha: f64,
    pub stochastic: bool,
}

/// Averages `n_rollouts` episodes and applies both normalizations.
pub fn evaluate<T: Scalar>(
    policy: &GaussianPolicy<T>,
    env: &CmdpSpec<T>,
    stats: &NormalizationStats,
    settings: &EvalSettings,
) -> Result<EvalReport> {
    if settings.n_rollouts == 0 {
        return Err(Error::InvalidArgument("n_rollouts must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..settings.n_rollouts as u64)
        .map(|i| settings.seed.wrapping_add(i))
        .collect();
    let mode = if settings.stochastic {
        RolloutMode::Stochastic
    } else {
        RolloutMode::Mean
    };
    let trajs = rollout_many(env, policy, mode, &seeds)?;
    let rewards: Vec<f64> = trajs.iter().map(|t| t.cumulative_reward.as_f64()).collect();
    let costs: Vec<f64> = trajs.iter().map(|t| t.cumulative_cost.as_f64()).collect();
    let n = trajs.len() as f64;
    let mean_reward = rewards.iter().sum::<f64>() / n;
    let mean_cost = costs.iter().sum::<f64>() / n;
    let norm_cost = normalized_cost(mean_cost, stats.kappa, settings.epsilon)?;
    Ok(EvalReport {
        normalized_reward: normalized_reward(mean_reward, stats)?,
        normalized_cost: norm_cost,
        is_safe: norm_cost <= 1.0,
        cvar_cost: cvar(&costs, settings.cvar_alpha)?,
        mean_reward,
        mean_cost,
        n_rollouts: settings.n_rollouts,
        rollout_rewards: rewards,
        rollout_costs: costs,
        seeds,
        kappa: stats.kappa,
        epsilon: settings.epsilon,
        cvar_alpha: settings.cvar_alpha,
        stochastic: settings.stochastic,
    })
}
