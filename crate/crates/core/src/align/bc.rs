use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::nn::{AdamState, GaussianPolicy, Matrix, Tape};
use crate::rng::{prng, substream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BcConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub hidden: Vec<usize>,
    pub init_log_std: f64,
    /// Share of the corpus, ranked by return, used for cloning.
    pub top_fraction: f64,
    pub seed: u64,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 256,
            lr: 1e-3,
            hidden: vec![64, 64],
            init_log_std: -0.5,
            top_fraction: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcOutput<T> {
    pub policy: GaussianPolicy<T>,
    /// Mean negative log-likelihood per epoch.
    pub epoch_losses: Vec<T>,
    /// Negative log-likelihood of every minibatch step.
    pub step_losses: Vec<T>,
}

/// The `ceil(fraction · n)` highest-return trajectories, in corpus order.
pub fn top_reward_subset<T: Scalar>(dataset: &[Trajectory<T>], fraction: f64) -> Result<Vec<Trajectory<T>>> {
    if dataset.is_empty() {
        return Err(Error::Empty("behavior cloning corpus"));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("top fraction must be in (0,1], got {fraction}")));
    }
    let k = ((fraction * dataset.len() as f64).ceil() as usize).clamp(1, dataset.len());
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.sort_by(|&a, &b| {
        dataset[b]
            .cumulative_reward
            .partial_cmp(&dataset[a].cumulative_reward)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut keep = order[..k].to_vec();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|i| dataset[i].clone()).collect())
}

/// Fits a Gaussian policy to every `(s, a)` pair of `dataset` by maximum
/// likelihood with minibatch Adam.
pub fn pretrain_bc<T: Scalar>(dataset: &[Trajectory<T>], config: &BcConfig) -> Result<BcOutput<T>> {
    let first = dataset.first().ok_or(Error::Empty("behavior cloning dataset"))?;
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch_size must be positive".into()));
    }
    let (sd, ad) = (first.state_dim(), first.action_dim());
    let mut states = Vec::new();
    let mut actions = Vec::new();
    for t in dataset {
        for (s, a) in t.steps() {
            if s.len() != sd || a.len() != ad {
                return Err(Error::dims(format!("trajectory {} step", t.id), sd + ad, s.len() + a.len()));
            }
            states.push(s);
            actions.push(a);
        }
    }
    if states.is_empty() {
        return Err(Error::Empty("behavior cloning steps"));
    }
    let mut policy = GaussianPolicy::new(
        sd,
        ad,
        &config.hidden,
        config.init_log_std,
        &mut prng(config.seed),
    );
    let mut adam = AdamState::for_policy(&policy, T::lit(config.lr));
    let mut shuffle_rng = substream(config.seed, 1);
    let mut order: Vec<usize> = (0..states.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step_losses = Vec::new();
    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = T::zero();
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let iteration = step_losses.len();
            let s = Matrix::from_rows(&chunk.iter().map(|&i| states[i]).collect::<Vec<_>>(), sd)?;
            let a = Matrix::from_rows(&chunk.iter().map(|&i| actions[i]).collect::<Vec<_>>(), ad)?;
            let mut tape = Tape::new();
            let vars = policy.record(&mut tape, true);
            let sv = tape.constant(s);
            let av = tape.constant(a);
            let mean = vars.mean(&mut tape, sv);
            let lp = vars.log_prob(&mut tape, mean, av);
            let total_lp = tape.sum_all(lp);
            let loss = tape.scale(total_lp, -T::one() / T::from_usize_lossy(chunk.len()));
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: "behavior cloning loss".into(),
                }
                .at_iteration(iteration));
            }
            let grads = tape.backward(loss).map_err(|e| e.at_iteration(iteration))?;
            policy.adam_step(&grads, &mut adam)?;
            step_losses.push(value);
            total += value;
            batches += 1;
        }
        epoch_losses.push(total / T::from_usize_lossy(batches));
    }
    Ok(BcOutput {
        policy,
        epoch_losses,
        step_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_dataset(n: usize) -> Vec<Trajectory<f64>> {
        (0..n)
            .map(|i| {
                Trajectory::new(i, vec![vec![0.5, -0.5]; 4], vec![vec![0.7]; 3], vec![0.0; 3], vec![0.0; 3])
                    .unwrap()
            })
            .collect()
    }

    #[test]
    fn repeated_pair_is_memorized() {
        let cfg = BcConfig {
            epochs: 300,
            batch_size: 8,
            lr: 1e-2,
            hidden: vec![8],
            ..BcConfig::default()
        };
        let out = pretrain_bc(&point_dataset(4), &cfg).unwrap();
        let m = out.policy.forward_mean(&[0.5, -0.5]).unwrap();
        assert!((m[0] - 0.7).abs() < 1e-2, "{m:?}");
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = BcConfig { epochs: 0, hidden: vec![4], ..BcConfig::default() };
        let out = pretrain_bc(&point_dataset(1), &cfg).unwrap();
        let init = GaussianPolicy::<f64>::new(2, 1, &[4], -0.5, &mut prng(0));
        assert_eq!(out.policy, init);
        assert!(out.epoch_losses.is_empty());
    }

    #[test]
    fn top_subset_keeps_highest_returns_in_order() {
        let data: Vec<_> = [3.0, 9.0, 1.0, 7.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| Trajectory::new(i, vec![vec![0.0]; 2], vec![vec![0.0]], vec![r], vec![0.0]).unwrap())
            .collect();
        let top = top_reward_subset(&data, 0.5).unwrap();
        assert_eq!(top.iter().map(|t| t.id).collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(top_reward_subset(&data, 0.01).unwrap().len(), 1);
        assert!(top_reward_subset(&data, 0.0).is_err());
        assert!(top_reward_subset::<f64>(&[], 0.5).is_err());
    }

    #[test]
    fn divergence_names_the_step() {
        let mut data = point_dataset(2);
        data[1].actions[0][0] = f64::NAN;
        let err = pretrain_bc(&data, &BcConfig { epochs: 1, batch_size: 100, ..BcConfig::default() }).unwrap_err();
        assert!(matches!(err, Error::AtIteration { iteration: 0, .. }), "{err:?}");
    }
}
