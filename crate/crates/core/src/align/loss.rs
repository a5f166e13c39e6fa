use super::{Origin, PreferenceTriple};
use crate::error::{Error, Result};
use crate::nn::policy::diag_gaussian_log_prob;
use crate::nn::{GaussianPolicy, Gradients, Matrix, Tape, Var};
use crate::scalar::Scalar;

/// A recorded loss: the tape, its scalar output and the per-triple `Δ`.
#[derive(Debug, Clone)]
pub struct LossGraph<T> {
    pub tape: Tape<T>,
    pub loss: Var,
    pub delta: Var,
}

impl<T: Scalar> LossGraph<T> {
    pub fn value(&self) -> T {
        self.tape.value(self.loss).item()
    }

    /// Gradients w.r.t. the fine-tuned policy, in [`GaussianPolicy::tensors`] order.
    pub fn gradients(&self) -> Result<Gradients<T>> {
        self.tape.backward(self.loss)
    }

    pub fn deltas(&self) -> &[T] {
        self.tape.value(self.delta).as_slice()
    }
}

fn check_args<T: Scalar>(triples: &[PreferenceTriple<T>], theta: &GaussianPolicy<T>) -> Result<()> {
    if triples.is_empty() {
        return Err(Error::Empty("preference triples"));
    }
    let (s, a) = (theta.state_dim(), theta.action_dim());
    for (i, t) in triples.iter().enumerate() {
        if t.state.len() != s {
            return Err(Error::dims(format!("triple {i} state"), s, t.state.len()));
        }
        if t.action_plus.len() != a || t.action_minus.len() != a {
            let got = if t.action_plus.len() != a { t.action_plus.len() } else { t.action_minus.len() };
            return Err(Error::dims(format!("triple {i} action"), a, got));
        }
    }
    Ok(())
}

fn stack<T: Scalar>(rows: impl Iterator<Item = Vec<T>>, n: usize, cols: usize) -> Matrix<T> {
    let data: Vec<T> = rows.flatten().collect();
    Matrix::from_vec(n, cols, data).expect("rows validated by check_args")
}

/// Records the objective for `theta` against precomputed reference means.
/// `sft_weight` of `None` drops the supervised term entirely.
pub(crate) fn record_loss<T: Scalar>(
    triples: &[PreferenceTriple<T>],
    theta: &GaussianPolicy<T>,
    ref_means: &Matrix<T>,
    ref_log_std: &[T],
    beta: T,
    sft_weight: Option<T>,
) -> Result<LossGraph<T>> {
    check_args(triples, theta)?;
    let n = triples.len();
    let (sd, ad) = (theta.state_dim(), theta.action_dim());
    if ref_means.shape() != (n, ad) {
        return Err(Error::dims("reference means rows", n, ref_means.rows()));
    }
    let states = stack(triples.iter().map(|t| t.state.clone()), n, sd);
    let plus = stack(triples.iter().map(|t| t.action_plus.clone()), n, ad);
    let minus = stack(triples.iter().map(|t| t.action_minus.clone()), n, ad);
    let ref_plus: Vec<T> = (0..n)
        .map(|i| diag_gaussian_log_prob(ref_means.row(i), ref_log_std, plus.row(i)))
        .collect();
    let ref_minus: Vec<T> = (0..n)
        .map(|i| diag_gaussian_log_prob(ref_means.row(i), ref_log_std, minus.row(i)))
        .collect();

    let n_p = triples.iter().filter(|t| t.origin == Origin::FromPreferred).count();
    let n_np = n - n_p;
    let inv = |k: usize| if k == 0 { T::zero() } else { T::one() / T::from_usize_lossy(k) };
    let (w_p, w_np) = (inv(n_p), inv(n_np));
    let group_w: Vec<T> = triples
        .iter()
        .map(|t| if t.origin == Origin::FromPreferred { w_p } else { w_np })
        .collect();
    let sft_w: Vec<T> = triples
        .iter()
        .map(|t| if t.origin == Origin::FromPreferred { w_p } else { T::zero() })
        .collect();

    let mut tape = Tape::new();
    let vars = theta.record(&mut tape, true);
    let s = tape.constant(states);
    let a_plus = tape.constant(plus);
    let a_minus = tape.constant(minus);
    let r_plus = tape.constant(Matrix::from_vec(n, 1, ref_plus)?);
    let r_minus = tape.constant(Matrix::from_vec(n, 1, ref_minus)?);
    let mean = vars.mean(&mut tape, s);
    let lp_plus = vars.log_prob(&mut tape, mean, a_plus);
    let lp_minus = vars.log_prob(&mut tape, mean, a_minus);
    let ratio_plus = tape.sub(lp_plus, r_plus);
    let ratio_minus = tape.sub(lp_minus, r_minus);
    let delta = tape.sub(ratio_plus, ratio_minus);
    let scaled = tape.scale(delta, beta);
    let log_sig = tape.log_sigmoid(scaled);
    for (v, what) in [(delta, "delta"), (log_sig, "log-sigmoid"), (lp_plus, "log-prob")] {
        if let Some(i) = tape.value(v).as_slice().iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("preference loss {what} at triple {i}"),
            });
        }
    }
    let gw = tape.constant(Matrix::from_vec(n, 1, group_w)?);
    let weighted = tape.mul(gw, log_sig);
    let mut objective = tape.sum_all(weighted);
    if let Some(lambda) = sft_weight {
        let sw = tape.constant(Matrix::from_vec(n, 1, sft_w)?);
        let sft = tape.mul(sw, lp_plus);
        let sft = tape.sum_all(sft);
        let sft = tape.scale(sft, lambda);
        objective = tape.add(objective, sft);
    }
    let loss = tape.scale(objective, -T::one());
    Ok(LossGraph { tape, loss, delta })
}

fn reference_means<T: Scalar>(
    triples: &[PreferenceTriple<T>],
    theta: &GaussianPolicy<T>,
    reference: &GaussianPolicy<T>,
) -> Result<Matrix<T>> {
    check_args(triples, theta)?;
    if reference.state_dim() != theta.state_dim() || reference.action_dim() != theta.action_dim() {
        return Err(Error::dims("reference policy action dim", theta.action_dim(), reference.action_dim()));
    }
    let states = stack(triples.iter().map(|t| t.state.clone()), triples.len(), theta.state_dim());
    reference.mean_batch(&states)
}

/// Preference loss on every triple plus `λ`-weighted log-likelihood of the
/// logged preferred actions. The reference enters as constants only.
pub fn prefine_loss<T: Scalar>(
    triples: &[PreferenceTriple<T>],
    pi_theta: &GaussianPolicy<T>,
    pi_ref: &GaussianPolicy<T>,
    beta: T,
    lambda: T,
) -> Result<LossGraph<T>> {
    if !(beta > T::zero()) || !(lambda >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need beta > 0 and lambda >= 0, got {beta} and {lambda}"
        )));
    }
    let means = reference_means(triples, pi_theta, pi_ref)?;
    let sft = (lambda > T::zero()).then_some(lambda);
    record_loss(triples, pi_theta, &means, pi_ref.log_std.as_slice(), beta, sft)
}

/// Plain pairwise preference loss, averaged per origin group.
pub fn dpo_loss<T: Scalar>(
    triples: &[PreferenceTriple<T>],
    pi_theta: &GaussianPolicy<T>,
    pi_ref: &GaussianPolicy<T>,
    beta: T,
) -> Result<LossGraph<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidArgument(format!("need beta > 0, got {beta}")));
    }
    let means = reference_means(triples, pi_theta, pi_ref)?;
    record_loss(triples, pi_theta, &means, pi_ref.log_std.as_slice(), beta, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::prng;
    use rand::Rng;

    fn random_triples(n: usize, s: usize, a: usize, seed: u64) -> Vec<PreferenceTriple<f64>> {
        let mut rng = prng(seed);
        let mut v = |k: usize| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        (0..n)
            .map(|i| PreferenceTriple {
                state: v(s),
                action_plus: v(a),
                action_minus: v(a),
                origin: if i % 2 == 0 { Origin::FromPreferred } else { Origin::FromNonPreferred },
                from_dataset: false,
            })
            .collect()
    }

    fn log_sigmoid(x: f64) -> f64 {
        -(1.0 + (-x).exp()).ln()
    }

    // Straight-line transcription with a hand-rolled density.
    fn oracle(t: &[PreferenceTriple<f64>], th: &GaussianPolicy<f64>, r: &GaussianPolicy<f64>, beta: f64, lambda: f64) -> f64 {
        let lp = |p: &GaussianPolicy<f64>, s: &[f64], a: &[f64]| {
            let m = p.forward_mean(s).unwrap();
            let mut acc = 0.0;
            for k in 0..a.len() {
                let sd = p.log_std.as_slice()[k].exp();
                acc += -0.5 * ((a[k] - m[k]) / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln();
            }
            acc
        };
        let (mut sp, mut np, mut cp, mut cn) = (0.0, 0.0, 0, 0);
        for x in t {
            let d = lp(th, &x.state, &x.action_plus) - lp(r, &x.state, &x.action_plus)
                - lp(th, &x.state, &x.action_minus)
                + lp(r, &x.state, &x.action_minus);
            match x.origin {
                Origin::FromPreferred => {
                    sp += -(log_sigmoid(beta * d) + lambda * lp(th, &x.state, &x.action_plus));
                    cp += 1;
                }
                Origin::FromNonPreferred => {
                    np += -log_sigmoid(beta * d);
                    cn += 1;
                }
            }
        }
        sp / cp as f64 + np / cn as f64
    }

    #[test]
    fn identical_policies_give_ln2_per_group() {
        let p = GaussianPolicy::<f64>::new(3, 2, &[6], -0.5, &mut prng(1));
        let t = random_triples(12, 3, 2, 2);
        for beta in [0.05, 0.2, 0.6, 0.95] {
            let l = prefine_loss(&t, &p, &p, beta, 0.0).unwrap();
            assert!((l.value() - 2.0 * std::f64::consts::LN_2).abs() < 1e-10);
            assert!(l.deltas().iter().all(|d| d.abs() < 1e-12));
        }
        let only_p: Vec<_> = t.iter().filter(|x| x.origin == Origin::FromPreferred).cloned().collect();
        let l = prefine_loss(&only_p, &p, &p, 0.05, 0.0).unwrap();
        assert!((l.value() - std::f64::consts::LN_2).abs() < 1e-10);
    }

    #[test]
    fn zero_lambda_is_bitwise_dpo() {
        let th = GaussianPolicy::<f64>::new(2, 1, &[5], -0.3, &mut prng(4));
        let r = GaussianPolicy::<f64>::new(2, 1, &[5], -0.6, &mut prng(5));
        let t = random_triples(10, 2, 1, 6);
        let a = prefine_loss(&t, &th, &r, 0.2, 0.0).unwrap();
        let b = dpo_loss(&t, &th, &r, 0.2).unwrap();
        assert_eq!(a.value().to_bits(), b.value().to_bits());
        assert_eq!(a.gradients().unwrap(), b.gradients().unwrap());
    }

    #[test]
    fn micro_instance_matches_transcription() {
        let th = GaussianPolicy::<f64>::new(2, 1, &[3], -0.2, &mut prng(10));
        let r = GaussianPolicy::<f64>::new(2, 1, &[3], -0.4, &mut prng(11));
        let t = random_triples(4, 2, 1, 12);
        let got = prefine_loss(&t, &th, &r, 0.05, 1.6).unwrap().value();
        assert!((got - oracle(&t, &th, &r, 0.05, 1.6)).abs() < 1e-10);
    }

    #[test]
    fn only_theta_is_differentiated() {
        let th = GaussianPolicy::<f64>::new(2, 1, &[3], -0.2, &mut prng(10));
        let r = GaussianPolicy::<f64>::new(2, 1, &[3], -0.4, &mut prng(11));
        let t = random_triples(6, 2, 1, 13);
        let l = prefine_loss(&t, &th, &r, 0.5, 1.0).unwrap();
        assert_eq!(l.tape.num_params(), th.tensors().len());
        let g = l.gradients().unwrap();
        assert_eq!(g.flat().len(), th.num_params());
    }

    #[test]
    fn raising_preferred_likelihood_lowers_loss() {
        let mut th = GaussianPolicy::<f64>::new(1, 1, &[2], 0.0, &mut prng(2));
        for m in th.tensors_mut() {
            m.fill(0.0);
        }
        let mk = |ap: f64| {
            vec![PreferenceTriple {
                state: vec![0.3],
                action_plus: vec![ap],
                action_minus: vec![1.0],
                origin: Origin::FromPreferred,
                from_dataset: false,
            }]
        };
        // a⁺ closer to the zero mean means a larger log π_θ(a⁺|s).
        let mut prev = f64::INFINITY;
        for ap in [2.0, 1.5, 1.0, 0.5, 0.0] {
            let l = prefine_loss(&mk(ap), &th, &th.clone(), 0.5, 1.6).unwrap().value();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn non_finite_reports_triple_index() {
        let p = GaussianPolicy::<f64>::new(2, 1, &[3], -0.2, &mut prng(1));
        let mut t = random_triples(5, 2, 1, 3);
        t[3].action_minus = vec![f64::INFINITY];
        match prefine_loss(&t, &p, &p, 0.1, 1.0) {
            Err(Error::NonFinite { context }) => assert!(context.contains("triple 3"), "{context}"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(prefine_loss(&[], &p, &p, 0.1, 1.0).is_err());
        assert!(prefine_loss(&t[..2], &p, &p, 0.0, 1.0).is_err());
    }
}
