use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::CounterfactualStrategy;
use crate::data::{PreferenceDatasets, StateIndex};
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{GaussianPolicy, Matrix};
use crate::rng::Prng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    /// `a⁺` logged in a preferred trajectory, `a⁻` counterfactual.
    FromPreferred,
    /// `a⁻` logged in a non-preferred trajectory, `a⁺` counterfactual.
    FromNonPreferred,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceTriple<T> {
    pub state: Vec<T>,
    pub action_plus: Vec<T>,
    pub action_minus: Vec<T>,
    pub origin: Origin,
    /// Counterfactual came from a dataset neighbor rather than the policy.
    pub from_dataset: bool,
}

impl<T> PreferenceTriple<T> {
    pub fn counterfactual(&self) -> &[T] {
        match self.origin {
            Origin::FromPreferred => &self.action_minus,
            Origin::FromNonPreferred => &self.action_plus,
        }
    }
}

type MemoKey = (Origin, Vec<u64>);

/// Nearest-neighbor lookup into both sides plus the acceptance radius.
///
/// Answers for every logged state are computed once up front, since
/// training only ever queries logged states.
#[derive(Debug, Clone)]
pub struct CounterfactualIndex<T> {
    pub preferred: StateIndex<T>,
    pub non_preferred: StateIndex<T>,
    pub d_max: T,
    memo: HashMap<MemoKey, Option<Vec<T>>>,
}

fn memo_key<T: Scalar>(origin: Origin, state: &[T]) -> MemoKey {
    (origin, state.iter().map(|v| v.as_f64().to_bits()).collect())
}

impl<T: Scalar> CounterfactualIndex<T> {
    pub fn build(sets: &PreferenceDatasets<T>, d_max: T) -> Result<Self> {
        let (preferred, non_preferred) = StateIndex::pair(&sets.preferred, &sets.non_preferred)?;
        let mut index = Self {
            preferred,
            non_preferred,
            d_max,
            memo: HashMap::new(),
        };
        let mut memo = HashMap::new();
        for (trajs, origin) in [
            (&sets.preferred, Origin::FromPreferred),
            (&sets.non_preferred, Origin::FromNonPreferred),
        ] {
            for (s, _) in trajs.iter().flat_map(|t| t.steps()) {
                memo.entry(memo_key(origin, s))
                    .or_insert_with(|| index.search(origin, s));
            }
        }
        index.memo = memo;
        Ok(index)
    }

    /// Dataset action from the side opposite to `origin`, if within `d_max`.
    pub fn lookup(&self, origin: Origin, state: &[T]) -> Option<Vec<T>> {
        match self.memo.get(&memo_key(origin, state)) {
            Some(hit) => hit.clone(),
            None => self.search(origin, state),
        }
    }

    fn search(&self, origin: Origin, state: &[T]) -> Option<Vec<T>> {
        let index = match origin {
            Origin::FromPreferred => &self.non_preferred,
            Origin::FromNonPreferred => &self.preferred,
        };
        index
            .nearest(state)
            .filter(|n| n.distance <= self.d_max)
            .map(|n| n.action.to_vec())
    }
}

/// Stacks every state of `trajs` (excluding terminal states) as rows.
pub(crate) fn stack_states<T: Scalar>(trajs: &[&Trajectory<T>]) -> Result<Matrix<T>> {
    let dim = trajs.first().map_or(0, |t| t.state_dim());
    let mut data = Vec::new();
    let mut rows = 0;
    for t in trajs {
        for (s, _) in t.steps() {
            if s.len() != dim {
                return Err(Error::dims("trajectory state", dim, s.len()));
            }
            data.extend_from_slice(s);
            rows += 1;
        }
    }
    Matrix::from_vec(rows, dim, data)
}

/// Counterfactual action for one step, consuming `rng` only when sampling.
pub(crate) fn counterfactual_action<T: Scalar>(
    policy: &GaussianPolicy<T>,
    mean: &[T],
    state: &[T],
    origin: Origin,
    strategy: CounterfactualStrategy,
    index: Option<&CounterfactualIndex<T>>,
    rng: &mut Prng,
) -> (Vec<T>, bool) {
    if strategy == CounterfactualStrategy::Mixed {
        if let Some(a) = index.and_then(|ix| ix.lookup(origin, state)) {
            return (a, true);
        }
    }
    (policy.sample_at_mean(mean, rng), false)
}

/// One triple per logged step: preferred trajectories first, then
/// non-preferred, each in order.
pub fn build_triples<T: Scalar>(
    batch_p: &[&Trajectory<T>],
    batch_np: &[&Trajectory<T>],
    policy: &GaussianPolicy<T>,
    strategy: CounterfactualStrategy,
    index: Option<&CounterfactualIndex<T>>,
    rng: &mut Prng,
) -> Result<Vec<PreferenceTriple<T>>> {
    if batch_p.is_empty() && batch_np.is_empty() {
        return Err(Error::Empty("triple batch"));
    }
    if strategy == CounterfactualStrategy::Mixed && index.is_none() {
        return Err(Error::InvalidArgument(
            "mixed counterfactuals need a state index".into(),
        ));
    }
    let mut triples = Vec::new();
    for (batch, origin) in [(batch_p, Origin::FromPreferred), (batch_np, Origin::FromNonPreferred)] {
        if batch.is_empty() {
            continue;
        }
        let states = stack_states(batch)?;
        let means = policy.mean_batch(&states)?;
        let logged = batch.iter().flat_map(|t| t.actions.iter());
        for (row, action) in logged.enumerate() {
            if action.len() != policy.action_dim() {
                return Err(Error::dims("logged action", policy.action_dim(), action.len()));
            }
            let state = states.row(row);
            let (cf, from_dataset) =
                counterfactual_action(policy, means.row(row), state, origin, strategy, index, rng);
            let (action_plus, action_minus) = match origin {
                Origin::FromPreferred => (action.clone(), cf),
                Origin::FromNonPreferred => (cf, action.clone()),
            };
            triples.push(PreferenceTriple {
                state: state.to_vec(),
                action_plus,
                action_minus,
                origin,
                from_dataset,
            });
        }
    }
    if triples.is_empty() {
        return Err(Error::Empty("triple batch"));
    }
    Ok(triples)
}
