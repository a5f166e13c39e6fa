use serde::{Deserialize, Serialize};

use super::triples::{counterfactual_action, stack_states, CounterfactualIndex};
use super::{CounterfactualStrategy, Origin};
use crate::data::PreferenceDatasets;
use crate::envs::{CmdpSpec, Trajectory};
use crate::error::{Error, Result};
use crate::nn::GaussianPolicy;
use crate::rng::Prng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideCounts {
    pub comparisons: usize,
    pub flips: usize,
}

impl SideCounts {
    pub fn pct(self) -> f64 {
        if self.comparisons == 0 {
            0.0
        } else {
            100.0 * self.flips as f64 / self.comparisons as f64
        }
    }

    fn merge(&mut self, other: SideCounts) {
        self.comparisons += other.comparisons;
        self.flips += other.flips;
    }
}

/// Safe/unsafe label disagreements between logged trajectories and their
/// counterfactual replays, bucketed by training quartile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MismatchLog {
    pub preferred: [SideCounts; 4],
    pub non_preferred: [SideCounts; 4],
    pub preferred_pct: [f64; 4],
    pub non_preferred_pct: [f64; 4],
    pub total_pct: [f64; 4],
}

impl MismatchLog {
    /// Quartile (0..4) an iteration falls in; the final iteration belongs to the last.
    pub fn quartile_of(iteration: usize, total: usize) -> usize {
        if total == 0 {
            0
        } else {
            (4 * iteration / total).min(3)
        }
    }

    pub fn record(&mut self, quartile: usize, preferred: SideCounts, non_preferred: SideCounts) {
        let q = quartile.min(3);
        self.preferred[q].merge(preferred);
        self.non_preferred[q].merge(non_preferred);
        self.preferred_pct[q] = self.preferred[q].pct();
        self.non_preferred_pct[q] = self.non_preferred[q].pct();
        let mut both = self.preferred[q];
        both.merge(self.non_preferred[q]);
        self.total_pct[q] = both.pct();
    }

    pub fn total(&self, quartile: usize) -> SideCounts {
        let mut c = self.preferred[quartile];
        c.merge(self.non_preferred[quartile]);
        c
    }

    /// Mean of the per-quartile totals over quartiles with comparisons.
    pub fn mean_total_pct(&self) -> f64 {
        let filled: Vec<f64> = (0..4)
            .filter(|&q| self.total(q).comparisons > 0)
            .map(|q| self.total_pct[q])
            .collect();
        if filled.is_empty() {
            0.0
        } else {
            filled.iter().sum::<f64>() / filled.len() as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot<T> {
    pub quartile: usize,
    pub policy: GaussianPolicy<T>,
}

fn side_counts<T: Scalar>(
    trajs: &[Trajectory<T>],
    origin: Origin,
    policy: &GaussianPolicy<T>,
    env: &CmdpSpec<T>,
    tau: T,
    strategy: CounterfactualStrategy,
    index: Option<&CounterfactualIndex<T>>,
    rng: &mut Prng,
) -> Result<SideCounts> {
    let mut counts = SideCounts::default();
    if trajs.is_empty() {
        return Ok(counts);
    }
    let refs: Vec<&Trajectory<T>> = trajs.iter().collect();
    let states = stack_states(&refs)?;
    let means = policy.mean_batch(&states)?;
    let mut row = 0;
    for t in trajs {
        let mut cost = T::zero();
        for _ in 0..t.len() {
            let s = states.row(row);
            let (a, _) = counterfactual_action(policy, means.row(row), s, origin, strategy, index, rng);
            cost += env.cost(s, &env.clip_action(&a));
            row += 1;
        }
        counts.comparisons += 1;
        if (t.cumulative_cost < tau) != (cost < tau) {
            counts.flips += 1;
        }
    }
    Ok(counts)
}

/// Replays every logged state sequence with counterfactual actions and
/// counts label flips on each side.
pub fn mismatch_counts<T: Scalar>(
    policy: &GaussianPolicy<T>,
    sets: &PreferenceDatasets<T>,
    env: &CmdpSpec<T>,
    tau: T,
    strategy: CounterfactualStrategy,
    index: Option<&CounterfactualIndex<T>>,
    rng: &mut Prng,
) -> Result<(SideCounts, SideCounts)> {
    if policy.state_dim() != env.state_dim {
        return Err(Error::dims("policy state dim vs env", env.state_dim, policy.state_dim()));
    }
    if policy.action_dim() != env.action_dim {
        return Err(Error::dims("policy action dim vs env", env.action_dim, policy.action_dim()));
    }
    if strategy == CounterfactualStrategy::Mixed && index.is_none() {
        return Err(Error::InvalidArgument("mixed counterfactuals need a state index".into()));
    }
    let p = side_counts(&sets.preferred, Origin::FromPreferred, policy, env, tau, strategy, index, rng)?;
    let np = side_counts(&sets.non_preferred, Origin::FromNonPreferred, policy, env, tau, strategy, index, rng)?;
    Ok((p, np))
}

/// Aggregates [`mismatch_counts`] over policy snapshots taken across training.
pub fn mismatch_quartiles<T: Scalar>(
    sets: &PreferenceDatasets<T>,
    snapshots: &[Snapshot<T>],
    env: &CmdpSpec<T>,
    tau: T,
    strategy: CounterfactualStrategy,
    index: Option<&CounterfactualIndex<T>>,
    rng: &mut Prng,
) -> Result<MismatchLog> {
    for q in 0..4 {
        if !snapshots.iter().any(|s| s.quartile == q) {
            return Err(Error::InvalidArgument(format!("no policy snapshot for quartile {}", q + 1)));
        }
    }
    let mut log = MismatchLog::default();
    for snap in snapshots {
        let (p, np) = mismatch_counts(&snap.policy, sets, env, tau, strategy, index, rng)?;
        log.record(snap.quartile, p, np);
    }
    Ok(log)
}
