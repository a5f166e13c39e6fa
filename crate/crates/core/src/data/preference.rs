use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::rng::prng;
use crate::scalar::Scalar;

/// Number of reward-quantile strata for the preferred set.
pub const QUANTILE_BINS: usize = 5;

/// Which end of the cost-sorted unsafe set feeds the non-preferred pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NpOrder {
    /// Mildly unsafe trajectories first.
    #[default]
    LowestCost,
    HighestCost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    pub quantile_bins: usize,
    /// Size of the cost-sorted unsafe pool the non-preferred set is drawn from.
    pub np_pool: usize,
    pub np_order: NpOrder,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        Self {
            quantile_bins: QUANTILE_BINS,
            np_pool: 100,
            np_order: NpOrder::LowestCost,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub n_p: usize,
    pub n_np: usize,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub preferred: bool,
    pub non_preferred: bool,
}

impl Shortfall {
    pub fn any(self) -> bool {
        self.preferred || self.non_preferred
    }
}

/// `D_p` (cost `< tau`) and `D_np` (cost `≥ tau`).
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceDatasets<T> {
    pub preferred: Vec<Trajectory<T>>,
    pub non_preferred: Vec<Trajectory<T>>,
    pub tau: T,
    pub provenance: Provenance,
    pub shortfall: Shortfall,
    pub options: SamplingOptions,
}

/// Everything needed to re-derive a [`PreferenceDatasets`] from its corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceManifest {
    pub tau: f64,
    pub n_p: usize,
    pub n_np: usize,
    pub seed: u64,
    pub source_id: String,
    pub quantile_bins: usize,
    pub np_pool: usize,
    pub np_order: NpOrder,
    pub preferred_ids: Vec<usize>,
    pub non_preferred_ids: Vec<usize>,
    pub shortfall_preferred: bool,
    pub shortfall_non_preferred: bool,
}

impl PreferenceManifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

impl<T: Scalar> PreferenceDatasets<T> {
    pub fn manifest(&self) -> PreferenceManifest {
        PreferenceManifest {
            tau: self.tau.as_f64(),
            n_p: self.provenance.n_p,
            n_np: self.provenance.n_np,
            seed: self.provenance.seed,
            source_id: self.provenance.source_id.clone(),
            quantile_bins: self.options.quantile_bins,
            np_pool: self.options.np_pool,
            np_order: self.options.np_order,
            preferred_ids: self.preferred.iter().map(|t| t.id).collect(),
            non_preferred_ids: self.non_preferred.iter().map(|t| t.id).collect(),
            shortfall_preferred: self.shortfall.preferred,
            shortfall_non_preferred: self.shortfall.non_preferred,
        }
    }
}

/// Rebuilds the sets a manifest names from the corpus it was derived from.
pub fn from_manifest<T: Scalar>(
    dataset: &[Trajectory<T>],
    manifest: &PreferenceManifest,
) -> Result<PreferenceDatasets<T>> {
    let pick = |ids: &[usize]| -> Result<Vec<Trajectory<T>>> {
        ids.iter()
            .map(|id| {
                dataset
                    .iter()
                    .find(|t| t.id == *id)
                    .cloned()
                    .ok_or_else(|| Error::InvalidArgument(format!("trajectory id {id} not in corpus")))
            })
            .collect()
    };
    Ok(PreferenceDatasets {
        preferred: pick(&manifest.preferred_ids)?,
        non_preferred: pick(&manifest.non_preferred_ids)?,
        tau: T::lit(manifest.tau),
        provenance: Provenance {
            seed: manifest.seed,
            n_p: manifest.n_p,
            n_np: manifest.n_np,
            source_id: manifest.source_id.clone(),
        },
        shortfall: Shortfall {
            preferred: manifest.shortfall_preferred,
            non_preferred: manifest.shortfall_non_preferred,
        },
        options: SamplingOptions {
            quantile_bins: manifest.quantile_bins,
            np_pool: manifest.np_pool,
            np_order: manifest.np_order,
        },
    })
}

/// Indices of SAFE (`cost < tau`) and UNSAFE (`cost ≥ tau`), in corpus order.
pub fn partition_indices<T: Scalar>(
    dataset: &[Trajectory<T>],
    tau: T,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if dataset.is_empty() {
        return Err(Error::Empty("trajectory dataset"));
    }
    if !(tau > T::zero()) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let (safe, unsafe_): (Vec<usize>, Vec<usize>) =
        (0..dataset.len()).partition(|&i| dataset[i].cumulative_cost < tau);
    Ok((safe, unsafe_))
}

pub fn partition<T: Scalar>(
    dataset: &[Trajectory<T>],
    tau: T,
) -> Result<(Vec<Trajectory<T>>, Vec<Trajectory<T>>)> {
    let (s, u) = partition_indices(dataset, tau)?;
    Ok((
        s.into_iter().map(|i| dataset[i].clone()).collect(),
        u.into_iter().map(|i| dataset[i].clone()).collect(),
    ))
}

/// Contiguous split of `len` ranks into `bins` strata: `[b·len/bins, (b+1)·len/bins)`.
pub(crate) fn bin_bounds(len: usize, bins: usize) -> Vec<(usize, usize)> {
    (0..bins)
        .map(|b| (b * len / bins, (b + 1) * len / bins))
        .collect()
}

fn by_desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

fn by_asc<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

pub fn build_preference_sets<T: Scalar>(
    dataset: &[Trajectory<T>],
    tau: T,
    n_p: usize,
    n_np: usize,
    seed: u64,
) -> Result<PreferenceDatasets<T>> {
    build_preference_sets_with(dataset, tau, n_p, n_np, seed, &SamplingOptions::default(), "")
}

/// Stratified `D_p` over the top reward half of SAFE and reward-spanning
/// `D_np` from the cost-sorted UNSAFE pool.
pub fn build_preference_sets_with<T: Scalar>(
    dataset: &[Trajectory<T>],
    tau: T,
    n_p: usize,
    n_np: usize,
    seed: u64,
    options: &SamplingOptions,
    source_id: &str,
) -> Result<PreferenceDatasets<T>> {
    if options.quantile_bins == 0 {
        return Err(Error::InvalidArgument("quantile_bins must be positive".into()));
    }
    let (safe, unsafe_) = partition_indices(dataset, tau)?;
    if safe.is_empty() {
        return Err(Error::Empty("SAFE partition"));
    }
    if unsafe_.is_empty() {
        return Err(Error::Empty("UNSAFE partition"));
    }
    let mut shortfall = Shortfall::default();
    let mut rng = prng(seed);

    // Preferred: rank SAFE by reward (desc, stable on corpus index).
    let mut ranked = safe;
    ranked.sort_by(|&a, &b| by_desc(dataset[a].cumulative_reward, dataset[b].cumulative_reward));
    let preferred_idx = if n_p >= ranked.len() {
        shortfall.preferred = n_p > ranked.len();
        ranked
    } else {
        let pool_len = ranked.len().div_ceil(2).max(n_p);
        let pool = &ranked[..pool_len];
        let q = options.quantile_bins;
        let bounds = bin_bounds(pool_len, q);
        let mut quota: Vec<usize> = bin_bounds(n_p, q).iter().map(|(a, b)| b - a).collect();
        // move any excess quota to the next bin with room
        let mut carry = 0;
        for (b, &(lo, hi)) in bounds.iter().enumerate() {
            quota[b] += carry;
            let size = hi - lo;
            carry = quota[b].saturating_sub(size);
            quota[b] -= carry;
        }
        let mut chosen = Vec::with_capacity(n_p);
        for (&(lo, hi), &k) in bounds.iter().zip(&quota) {
            let mut picks: Vec<usize> = sample(&mut rng, hi - lo, k).into_iter().collect();
            picks.sort_unstable();
            chosen.extend(picks.into_iter().map(|p| pool[lo + p]));
        }
        chosen
    };

    // Non-preferred: cost-sorted pool, then evenly spaced reward ranks.
    let mut by_cost = unsafe_;
    match options.np_order {
        NpOrder::LowestCost => by_cost
            .sort_by(|&a, &b| by_asc(dataset[a].cumulative_cost, dataset[b].cumulative_cost)),
        NpOrder::HighestCost => by_cost
            .sort_by(|&a, &b| by_desc(dataset[a].cumulative_cost, dataset[b].cumulative_cost)),
    }
    by_cost.truncate(options.np_pool.min(by_cost.len()));
    let mut pool = by_cost;
    pool.sort_by(|&a, &b| by_asc(dataset[a].cumulative_reward, dataset[b].cumulative_reward));
    let non_preferred_idx = if n_np >= pool.len() {
        shortfall.non_preferred = n_np > pool.len();
        pool
    } else {
        evenly_spaced_ranks(pool.len(), n_np)
            .into_iter()
            .map(|r| pool[r])
            .collect()
    };

    Ok(PreferenceDatasets {
        preferred: preferred_idx.iter().map(|&i| dataset[i].clone()).collect(),
        non_preferred: non_preferred_idx.iter().map(|&i| dataset[i].clone()).collect(),
        tau,
        provenance: Provenance {
            seed,
            n_p,
            n_np,
            source_id: source_id.to_string(),
        },
        shortfall,
        options: options.clone(),
    })
}

/// `k` distinct ranks spread evenly over `0..len` (requires `k ≤ len`).
pub(crate) fn evenly_spaced_ranks(len: usize, k: usize) -> Vec<usize> {
    match k {
        0 => Vec::new(),
        1 => vec![(len - 1) / 2],
        _ => (0..k)
            .map(|j| ((j * (len - 1)) as f64 / (k - 1) as f64).round() as usize)
            .collect(),
    }
}
