use serde::{Deserialize, Serialize};

use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetTag {
    Preferred,
    NonPreferred,
}

impl SetTag {
    pub fn opposite(self) -> Self {
        match self {
            SetTag::Preferred => SetTag::NonPreferred,
            SetTag::NonPreferred => SetTag::Preferred,
        }
    }
}

/// Per-dimension mean and std used for z-normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Scalar> NormStats<T> {
    /// Population statistics; a zero-variance dimension gets unit std.
    pub fn from_states<'a, I>(states: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let states: Vec<&[T]> = states.into_iter().collect();
        let first = states.first().ok_or(Error::Empty("normalization states"))?;
        let dim = first.len();
        let n = T::from_usize_lossy(states.len());
        let mut mean = vec![T::zero(); dim];
        for s in &states {
            if s.len() != dim {
                return Err(Error::dims("normalization state", dim, s.len()));
            }
            for (m, &v) in mean.iter_mut().zip(s.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); dim];
        for s in &states {
            for ((acc, &v), &m) in var.iter_mut().zip(s.iter()).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let tiny = T::lit(1e-12);
        let std = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > tiny {
                    s
                } else {
                    T::one()
                }
            })
            .collect();
        Ok(Self { mean, std })
    }

    pub fn normalize(&self, state: &[T]) -> Vec<T> {
        state
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor<'a, T> {
    pub index: usize,
    pub state: &'a [T],
    pub action: &'a [T],
    pub distance: T,
}

/// Exact nearest-neighbor lookup over `(state, action, owner)` entries under
/// z-normalized Euclidean distance. Ties resolve to the lowest insertion index.
#[derive(Debug, Clone)]
pub struct StateIndex<T> {
    stats: NormStats<T>,
    states: Vec<Vec<T>>,
    actions: Vec<Vec<T>>,
    owners: Vec<SetTag>,
    normalized: Vec<T>,
    dim: usize,
}

impl<T: Scalar> StateIndex<T> {
    pub fn new(stats: NormStats<T>) -> Self {
        let dim = stats.mean.len();
        Self {
            stats,
            states: Vec::new(),
            actions: Vec::new(),
            owners: Vec::new(),
            normalized: Vec::new(),
            dim,
        }
    }

    pub fn push(&mut self, state: &[T], action: &[T], owner: SetTag) -> Result<()> {
        if state.len() != self.dim {
            return Err(Error::dims("index state", self.dim, state.len()));
        }
        self.normalized.extend(self.stats.normalize(state));
        self.states.push(state.to_vec());
        self.actions.push(action.to_vec());
        self.owners.push(owner);
        Ok(())
    }

    /// Indexes every `(s_t, a_t)` of `trajectories` under `owner`.
    pub fn extend_from(&mut self, trajectories: &[Trajectory<T>], owner: SetTag) -> Result<()> {
        for t in trajectories {
            for (s, a) in t.steps() {
                self.push(s, a, owner)?;
            }
        }
        Ok(())
    }

    /// One index per side of a preference pair, sharing statistics computed
    /// over the states of both sides.
    pub fn pair(
        preferred: &[Trajectory<T>],
        non_preferred: &[Trajectory<T>],
    ) -> Result<(Self, Self)> {
        let stats = NormStats::from_states(
            preferred
                .iter()
                .chain(non_preferred)
                .flat_map(|t| t.steps().map(|(s, _)| s)),
        )?;
        let mut p = Self::new(stats.clone());
        p.extend_from(preferred, SetTag::Preferred)?;
        let mut np = Self::new(stats);
        np.extend_from(non_preferred, SetTag::NonPreferred)?;
        Ok((p, np))
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn stats(&self) -> &NormStats<T> {
        &self.stats
    }

    pub fn owner(&self, i: usize) -> SetTag {
        self.owners[i]
    }

    /// Nearest entry to `state`, or `None` for an empty index.
    pub fn nearest(&self, state: &[T]) -> Option<Neighbor<'_, T>> {
        if self.is_empty() || state.len() != self.dim {
            return None;
        }
        let q = self.stats.normalize(state);
        let mut best = 0usize;
        let mut best_d2 = T::infinity();
        for (i, row) in self.normalized.chunks_exact(self.dim).enumerate() {
            let mut d2 = T::zero();
            for (&a, &b) in row.iter().zip(&q) {
                let d = a - b;
                d2 += d * d;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best = i;
            }
        }
        Some(Neighbor {
            index: best,
            state: &self.states[best],
            action: &self.actions[best],
            distance: best_d2.sqrt(),
        })
    }
}

/// `(state′, action′, distance)` of the closest indexed entry.
pub fn nearest_counterfactual<'a, T: Scalar>(
    index: &'a StateIndex<T>,
    state: &[T],
) -> Option<(&'a [T], &'a [T], T)> {
    index.nearest(state).map(|n| (n.state, n.action, n.distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use rand::Rng;

    fn brute_force(entries: &[Vec<f64>], stats: &NormStats<f64>, q: &[f64]) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, e) in entries.iter().enumerate() {
            let d2: f64 = e
                .iter()
                .zip(q)
                .zip(stats.std.iter())
                .map(|((a, b), s)| ((a - b) / s).powi(2))
                .sum();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    #[test]
    fn exact_match_has_zero_distance() {
        let entries = [vec![0.0, 1.0], vec![2.0, 3.0], vec![-1.0, 0.5]];
        let stats = NormStats::from_states(entries.iter().map(Vec::as_slice)).unwrap();
        let mut idx = StateIndex::new(stats);
        for (i, e) in entries.iter().enumerate() {
            idx.push(e, &[i as f64], SetTag::Preferred).unwrap();
        }
        let n = idx.nearest(&[2.0, 3.0]).unwrap();
        assert_eq!(n.index, 1);
        assert_eq!(n.action, &[1.0]);
        assert_eq!(n.distance, 0.0);
    }

    #[test]
    fn single_entry_always_wins() {
        let stats = NormStats::from_states([[0.3, 0.3].as_slice()]).unwrap();
        assert_eq!(stats.std, vec![1.0, 1.0]);
        let mut idx = StateIndex::new(stats);
        idx.push(&[0.3, 0.3], &[7.0], SetTag::NonPreferred).unwrap();
        for q in [[100.0, -5.0], [0.0, 0.0]] {
            let (_, a, _) = nearest_counterfactual(&idx, &q).unwrap();
            assert_eq!(a, &[7.0]);
        }
        assert!(StateIndex::<f64>::new(NormStats { mean: vec![0.0], std: vec![1.0] })
            .nearest(&[0.0])
            .is_none());
    }

    #[test]
    fn ties_resolve_to_lowest_insertion_index() {
        let stats = NormStats { mean: vec![0.0], std: vec![1.0] };
        let mut idx = StateIndex::new(stats);
        idx.push(&[1.0], &[10.0], SetTag::Preferred).unwrap();
        idx.push(&[-1.0], &[20.0], SetTag::Preferred).unwrap();
        idx.push(&[1.0], &[30.0], SetTag::Preferred).unwrap();
        assert_eq!(idx.nearest(&[0.0]).unwrap().index, 0);
        assert_eq!(idx.nearest(&[1.0]).unwrap().index, 0);
    }

    #[test]
    fn matches_linear_scan_on_random_data() {
        let mut rng = prng(42);
        let entries: Vec<Vec<f64>> = (0..1000)
            .map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(0.0..20.0)])
            .collect();
        let stats = NormStats::from_states(entries.iter().map(Vec::as_slice)).unwrap();
        let mut idx = StateIndex::new(stats.clone());
        for e in &entries {
            idx.push(e, &[0.0], SetTag::Preferred).unwrap();
        }
        for _ in 0..100 {
            let q = [rng.random_range(-4.0..4.0), rng.random_range(-1.0..21.0)];
            let n = idx.nearest(&q).unwrap();
            let (bi, bd) = brute_force(&entries, &stats, &q);
            assert_eq!(n.index, bi);
            assert!((n.distance - bd).abs() <= 1e-12 * bd.max(1.0));
        }
    }
}
