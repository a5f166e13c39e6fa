use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where the counterfactual action of a triple comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CounterfactualStrategy {
    /// Always sample from the current policy.
    #[default]
    PolicySampled,
    /// Nearest opposite-set action when close enough, else sample.
    Mixed,
}

impl fmt::Display for CounterfactualStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PolicySampled => "policy",
            Self::Mixed => "mixed",
        })
    }
}

impl FromStr for CounterfactualStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "policy" | "policy_sampled" | "policysampled" => Ok(Self::PolicySampled),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown counterfactual strategy `{other}` (expected policy or mixed)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlignConfig {
    pub beta: f64,
    pub lambda: f64,
    pub lr: f64,
    /// State-action triples per side; whole trajectories are drawn until
    /// this many states are covered.
    pub batch_size: usize,
    pub iterations: usize,
    pub tau: f64,
    pub strategy: CounterfactualStrategy,
    /// Max z-normalized distance for a dataset counterfactual (Mixed only).
    pub d_max: f64,
    pub seed: u64,
    /// Iterations between history records; 0 picks 20 records per run.
    pub eval_interval: usize,
    pub eval_rollouts: usize,
    pub epsilon_cost: f64,
    /// Keep a policy copy every this many iterations (0 = never).
    pub checkpoint_interval: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            beta: 0.05,
            lambda: 1.6,
            lr: 3e-4,
            batch_size: 256,
            iterations: 20_000,
            tau: 15.0,
            strategy: CounterfactualStrategy::PolicySampled,
            d_max: 1.0,
            seed: 0,
            eval_interval: 0,
            eval_rollouts: 100,
            epsilon_cost: 1e-3,
            checkpoint_interval: 0,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be > 0, got {}", self.beta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.tau > 0.0) {
            return bad(format!("tau must be > 0, got {}", self.tau));
        }
        if !(self.d_max >= 0.0) {
            return bad(format!("d_max must be >= 0, got {}", self.d_max));
        }
        if !(self.epsilon_cost > 0.0) {
            return bad(format!("epsilon_cost must be > 0, got {}", self.epsilon_cost));
        }
        Ok(())
    }

    /// History cadence actually used.
    pub fn history_interval(&self) -> usize {
        if self.eval_interval > 0 {
            self.eval_interval
        } else {
            (self.iterations / 20).max(1)
        }
    }

    /// Trajectories drawn per side so that `batch_size` states are covered.
    pub fn trajectories_per_side(&self, horizon: usize) -> usize {
        self.batch_size.div_ceil(horizon.max(1)).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = AlignConfig::default();
        c.validate().unwrap();
        assert_eq!(c.history_interval(), 1000);
        assert_eq!(c.trajectories_per_side(100), 3);
        assert_eq!(c.trajectories_per_side(60), 5);
        assert_eq!(c.trajectories_per_side(1000), 1);
    }

    #[test]
    fn rejects_bad_values() {
        for c in [
            AlignConfig { beta: 0.0, ..AlignConfig::default() },
            AlignConfig { lambda: -0.1, ..AlignConfig::default() },
            AlignConfig { batch_size: 0, ..AlignConfig::default() },
            AlignConfig { lr: f64::NAN, ..AlignConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("policy".parse::<CounterfactualStrategy>().unwrap(), CounterfactualStrategy::PolicySampled);
        assert_eq!("MIXED".parse::<CounterfactualStrategy>().unwrap(), CounterfactualStrategy::Mixed);
        assert!("nearest".parse::<CounterfactualStrategy>().is_err());
        assert_eq!(CounterfactualStrategy::Mixed.to_string(), "mixed");
    }
}
