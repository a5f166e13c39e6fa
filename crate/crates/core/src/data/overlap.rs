use std::collections::HashSet;

use crate::envs::Trajectory;
use crate::scalar::Scalar;

/// Bins per state dimension for the occupancy grid.
pub const GRID_BINS: usize = 20;

/// Jaccard similarity of the grid cells visited by `a` and by `b`.
///
/// The grid spans the joint per-dimension state range of both sets with
/// `GRID_BINS` bins per dimension. Returns 0 when neither set has states.
pub fn jaccard_overlap<T: Scalar>(a: &[Trajectory<T>], b: &[Trajectory<T>]) -> f64 {
    let all = || a.iter().chain(b).flat_map(|t| t.states.iter());
    let Some(dim) = all().next().map(Vec::len) else {
        return 0.0;
    };
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for s in all() {
        for (d, v) in s.iter().enumerate() {
            lo[d] = lo[d].min(v.as_f64());
            hi[d] = hi[d].max(v.as_f64());
        }
    }
    let cell = |s: &Vec<T>| -> Vec<usize> {
        s.iter()
            .enumerate()
            .map(|(d, v)| {
                let span = hi[d] - lo[d];
                if span <= 0.0 {
                    0
                } else {
                    (((v.as_f64() - lo[d]) / span * GRID_BINS as f64) as usize).min(GRID_BINS - 1)
                }
            })
            .collect()
    };
    let occupied = |set: &[Trajectory<T>]| -> HashSet<Vec<usize>> {
        set.iter().flat_map(|t| t.states.iter().map(cell)).collect()
    };
    let (ca, cb) = (occupied(a), occupied(b));
    let union = ca.union(&cb).count();
    if union == 0 {
        return 0.0;
    }
    ca.intersection(&cb).count() as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(id: usize, xs: &[f64]) -> Trajectory<f64> {
        let states: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let n = states.len() - 1;
        Trajectory::new(id, states, vec![vec![0.0]; n], vec![0.0; n], vec![0.0; n]).unwrap()
    }

    #[test]
    fn identical_sets_overlap_fully_and_disjoint_sets_not_at_all() {
        let a = vec![line(0, &[0.0, 0.5, 1.0])];
        assert_eq!(jaccard_overlap(&a, &a), 1.0);
        let b = vec![line(1, &[10.0, 10.5])];
        assert_eq!(jaccard_overlap(&a, &b), 0.0);
        let c = vec![line(2, &[0.0, 10.0])];
        let j = jaccard_overlap(&a, &c);
        assert!((0.0..=1.0).contains(&j) && j > 0.0);
        assert_eq!(jaccard_overlap::<f64>(&[], &[]), 0.0);
    }
}
