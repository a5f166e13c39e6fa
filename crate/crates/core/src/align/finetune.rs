use rand::Rng;
use serde::{Deserialize, Serialize};

use super::loss::record_loss;
use super::mismatch::{mismatch_counts, MismatchLog};
use super::triples::{build_triples, stack_states, CounterfactualIndex};
use super::{AlignConfig, CounterfactualStrategy};
use crate::data::PreferenceDatasets;
use crate::envs::{CmdpSpec, Trajectory};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalSettings, NormalizationStats};
use crate::nn::{AdamState, GaussianPolicy, Matrix};
use crate::rng::substream;
use crate::scalar::Scalar;

/// One line of the metric history, taken before the update at `iteration`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub iteration: usize,
    pub loss: f64,
    /// Normalized reward, when normalization statistics were supplied.
    pub eval_reward: Option<f64>,
    /// Normalized cost, when normalization statistics were supplied.
    pub eval_cost: Option<f64>,
    pub mismatch_pref_pct: f64,
    pub mismatch_nonpref_pct: f64,
}

#[derive(Debug, Clone)]
pub struct FinetuneOutput<T> {
    pub policy: GaussianPolicy<T>,
    pub mismatch: MismatchLog,
    pub history: Vec<HistoryRecord>,
    pub gradient_updates: usize,
    pub reference_checksum_before: String,
    pub reference_checksum_after: String,
    /// `(iteration, policy)` copies at the configured checkpoint interval.
    pub checkpoints: Vec<(usize, GaussianPolicy<T>)>,
    /// Share of counterfactual actions taken from the dataset (Mixed only).
    pub dataset_counterfactual_fraction: f64,
}

fn reference_cache<T: Scalar>(reference: &GaussianPolicy<T>, trajs: &[Trajectory<T>]) -> Result<Vec<Matrix<T>>> {
    trajs
        .iter()
        .map(|t| reference.mean_batch(&stack_states(&[t])?))
        .collect()
}

fn gather<T: Scalar>(cache_p: &[Matrix<T>], p: &[usize], cache_np: &[Matrix<T>], np: &[usize], cols: usize) -> Result<Matrix<T>> {
    let mut data = Vec::new();
    for m in p.iter().map(|&i| &cache_p[i]).chain(np.iter().map(|&i| &cache_np[i])) {
        data.extend_from_slice(m.as_slice());
    }
    let rows = data.len() / cols.max(1);
    Matrix::from_vec(rows, cols, data)
}

/// Fine-tunes a copy of `pi_ref` on the preference sets, one Adam step per
/// iteration. `stats` enables periodic evaluation rollouts.
pub fn finetune<T: Scalar>(
    pi_ref: &GaussianPolicy<T>,
    sets: &PreferenceDatasets<T>,
    env: &CmdpSpec<T>,
    config: &AlignConfig,
    stats: Option<&NormalizationStats>,
) -> Result<FinetuneOutput<T>> {
    config.validate()?;
    if sets.preferred.is_empty() {
        return Err(Error::Empty("preferred trajectories"));
    }
    if sets.non_preferred.is_empty() {
        return Err(Error::Empty("non-preferred trajectories"));
    }
    if pi_ref.state_dim() != env.state_dim || pi_ref.action_dim() != env.action_dim {
        return Err(Error::dims("reference policy vs env action dim", env.action_dim, pi_ref.action_dim()));
    }
    let reference_checksum_before = pi_ref.checksum();
    let index = match config.strategy {
        CounterfactualStrategy::Mixed => Some(CounterfactualIndex::build(sets, T::lit(config.d_max))?),
        CounterfactualStrategy::PolicySampled => None,
    };
    let cache_p = reference_cache(pi_ref, &sets.preferred)?;
    let cache_np = reference_cache(pi_ref, &sets.non_preferred)?;
    let per_side = config.trajectories_per_side(sets.preferred[0].len());
    let beta = T::lit(config.beta);
    let sft = (config.lambda > 0.0).then(|| T::lit(config.lambda));
    let tau = T::lit(config.tau);
    let interval = config.history_interval();
    let eval_settings = EvalSettings {
        n_rollouts: config.eval_rollouts,
        epsilon: config.epsilon_cost,
        seed: config.seed,
        ..EvalSettings::default()
    };

    let mut train_rng = substream(config.seed, 1);
    let mut diag_rng = substream(config.seed, 2);
    let mut theta = pi_ref.clone();
    let mut adam = AdamState::for_policy(&theta, T::lit(config.lr));
    let mut mismatch = MismatchLog::default();
    let mut history = Vec::new();
    let mut checkpoints = Vec::new();
    let mut gradient_updates = 0usize;
    let (mut from_dataset, mut counterfactuals) = (0usize, 0usize);

    for it in 0..=config.iterations {
        let p_ids: Vec<usize> = (0..per_side).map(|_| train_rng.random_range(0..sets.preferred.len())).collect();
        let np_ids: Vec<usize> =
            (0..per_side).map(|_| train_rng.random_range(0..sets.non_preferred.len())).collect();
        let batch_p: Vec<&Trajectory<T>> = p_ids.iter().map(|&i| &sets.preferred[i]).collect();
        let batch_np: Vec<&Trajectory<T>> = np_ids.iter().map(|&i| &sets.non_preferred[i]).collect();
        let attach = |e: Error| e.at_iteration(it);
        let triples = build_triples(&batch_p, &batch_np, &theta, config.strategy, index.as_ref(), &mut train_rng)
            .map_err(attach)?;
        let ref_means = gather(&cache_p, &p_ids, &cache_np, &np_ids, theta.action_dim()).map_err(attach)?;
        let graph = record_loss(&triples, &theta, &ref_means, pi_ref.log_std.as_slice(), beta, sft)
            .map_err(attach)?;

        if it % interval == 0 || it == config.iterations {
            let (p, np) = mismatch_counts(&theta, sets, env, tau, config.strategy, index.as_ref(), &mut diag_rng)
                .map_err(attach)?;
            mismatch.record(MismatchLog::quartile_of(it, config.iterations), p, np);
            let (eval_reward, eval_cost) = match stats {
                Some(s) if config.eval_rollouts > 0 => {
                    let r = evaluate(&theta, env, s, &eval_settings).map_err(attach)?;
                    (Some(r.normalized_reward), Some(r.normalized_cost))
                }
                _ => (None, None),
            };
            history.push(HistoryRecord {
                iteration: it,
                loss: graph.value().as_f64(),
                eval_reward,
                eval_cost,
                mismatch_pref_pct: p.pct(),
                mismatch_nonpref_pct: np.pct(),
            });
        }
        if config.checkpoint_interval > 0 && (it % config.checkpoint_interval == 0 || it == config.iterations) {
            checkpoints.push((it, theta.clone()));
        }
        if it == config.iterations {
            break;
        }
        counterfactuals += triples.len();
        from_dataset += triples.iter().filter(|t| t.from_dataset).count();
        let grads = graph.gradients().map_err(attach)?;
        theta.adam_step(&grads, &mut adam).map_err(attach)?;
        gradient_updates += 1;
    }

    Ok(FinetuneOutput {
        policy: theta,
        mismatch,
        history,
        gradient_updates,
        reference_checksum_before,
        reference_checksum_after: pi_ref.checksum(),
        checkpoints,
        dataset_counterfactual_fraction: if counterfactuals == 0 {
            0.0
        } else {
            from_dataset as f64 / counterfactuals as f64
        },
    })
}

/// The same loop with the supervised term removed.
pub fn train_ppl<T: Scalar>(
    pi_ref: &GaussianPolicy<T>,
    sets: &PreferenceDatasets<T>,
    env: &CmdpSpec<T>,
    config: &AlignConfig,
    stats: Option<&NormalizationStats>,
) -> Result<FinetuneOutput<T>> {
    let config = AlignConfig {
        lambda: 0.0,
        ..config.clone()
    };
    finetune(pi_ref, sets, env, &config, stats)
}
