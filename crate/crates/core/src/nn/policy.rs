use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::mlp::{MlpParams, MlpVars};
use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::Matrix;
use crate::scalar::Scalar;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian policy: an MLP produces the action mean and a
/// state-independent learnable vector holds the per-dimension log-std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy<T> {
    pub trunk: MlpParams<T>,
    pub log_std: Matrix<T>,
}

/// Tape handles for a recorded policy.
#[derive(Debug, Clone)]
pub struct PolicyVars {
    pub trunk: MlpVars,
    pub log_std: Var,
}

impl<T: Scalar> GaussianPolicy<T> {
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        action_dim: usize,
        hidden_sizes: &[usize],
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        let trunk = MlpParams::init(state_dim, hidden_sizes, action_dim, rng);
        let mut policy = Self {
            trunk,
            log_std: Matrix::filled(1, action_dim, T::lit(init_log_std)),
        };
        policy.clamp_log_std();
        policy
    }

    pub fn from_parts(trunk: MlpParams<T>, log_std: Vec<T>) -> Result<Self> {
        if log_std.len() != trunk.output_dim() {
            return Err(Error::dims("log_std", trunk.output_dim(), log_std.len()));
        }
        if log_std.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "log_std".into(),
            });
        }
        let mut policy = Self {
            trunk,
            log_std: Matrix::row_vector(log_std),
        };
        policy.clamp_log_std();
        Ok(policy)
    }

    pub fn state_dim(&self) -> usize {
        self.trunk.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.trunk.output_dim()
    }

    pub fn num_params(&self) -> usize {
        self.trunk.num_params() + self.log_std.len()
    }

    pub fn clamp_log_std(&mut self) {
        let (lo, hi) = (T::lit(LOG_STD_MIN), T::lit(LOG_STD_MAX));
        for v in self.log_std.as_mut_slice() {
            *v = v.max(lo).min(hi);
        }
    }

    pub fn std(&self) -> Vec<T> {
        self.log_std.as_slice().iter().map(|v| v.exp()).collect()
    }

    /// Parameter tensors in slot order: `W0, b0, W1, b1, …, log_std`.
    pub fn tensors(&self) -> Vec<&Matrix<T>> {
        let mut out = Vec::with_capacity(2 * self.trunk.weights.len() + 1);
        for (w, b) in self.trunk.weights.iter().zip(&self.trunk.biases) {
            out.push(w);
            out.push(b);
        }
        out.push(&self.log_std);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix<T>> {
        let mut out = Vec::with_capacity(2 * self.trunk.weights.len() + 1);
        for (w, b) in self.trunk.weights.iter_mut().zip(self.trunk.biases.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.log_std);
        out
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.tensors()
            .into_iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::dims("flat parameter vector", self.num_params(), flat.len()));
        }
        let mut offset = 0;
        for m in self.tensors_mut() {
            let n = m.len();
            m.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// SHA-256 over the IEEE-754 bit patterns of every parameter, in slot order.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for m in self.tensors() {
            hasher.update((m.rows() as u64).to_le_bytes());
            hasher.update((m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                hasher.update(v.as_f64().to_bits().to_le_bytes());
            }
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn check_state(&self, state: &[T]) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::dims("policy state", self.state_dim(), state.len()));
        }
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "policy state".into(),
            });
        }
        Ok(())
    }

    pub fn forward_mean(&self, state: &[T]) -> Result<Vec<T>> {
        self.check_state(state)?;
        let x = Matrix::row_vector(state.to_vec());
        Ok(self.trunk.forward(&x).into_vec())
    }

    /// Means for a batch of states stacked as rows.
    pub fn mean_batch(&self, states: &Matrix<T>) -> Result<Matrix<T>> {
        if states.cols() != self.state_dim() {
            return Err(Error::dims("policy state batch", self.state_dim(), states.cols()));
        }
        Ok(self.trunk.forward(states))
    }

    pub fn log_prob(&self, state: &[T], action: &[T]) -> Result<T> {
        let mean = self.forward_mean(state)?;
        self.log_prob_at_mean(&mean, action)
    }

    /// Log-density of `action` given a precomputed mean.
    pub fn log_prob_at_mean(&self, mean: &[T], action: &[T]) -> Result<T> {
        if action.len() != self.action_dim() {
            return Err(Error::dims("policy action", self.action_dim(), action.len()));
        }
        if action.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "log_prob action".into(),
            });
        }
        Ok(diag_gaussian_log_prob(mean, self.log_std.as_slice(), action))
    }

    pub fn sample_action<R: Rng + ?Sized>(&self, state: &[T], rng: &mut R) -> Result<Vec<T>> {
        let mean = self.forward_mean(state)?;
        Ok(self.sample_at_mean(&mean, rng))
    }

    /// `mean + σ ⊙ z`, `z ~ N(0, I)` drawn from `rng`.
    pub fn sample_at_mean<R: Rng + ?Sized>(&self, mean: &[T], rng: &mut R) -> Vec<T> {
        mean.iter()
            .zip(self.log_std.as_slice())
            .map(|(&m, &ls)| {
                let z: f64 = rng.sample(StandardNormal);
                m + ls.exp() * T::lit(z)
            })
            .collect()
    }

    pub fn record(&self, tape: &mut Tape<T>, trainable: bool) -> PolicyVars {
        let trunk = self.trunk.record(tape, trainable);
        let log_std = if trainable {
            tape.param(self.log_std.clone())
        } else {
            tape.constant(self.log_std.clone())
        };
        PolicyVars { trunk, log_std }
    }

    pub fn cast<U: Scalar>(&self) -> GaussianPolicy<U> {
        GaussianPolicy {
            trunk: MlpParams {
                weights: self.trunk.weights.iter().map(Matrix::cast).collect(),
                biases: self.trunk.biases.iter().map(Matrix::cast).collect(),
                hidden_sizes: self.trunk.hidden_sizes.clone(),
            },
            log_std: self.log_std.cast(),
        }
    }
}

impl PolicyVars {
    pub fn mean<T: Scalar>(&self, tape: &mut Tape<T>, states: Var) -> Var {
        self.trunk.forward(tape, states)
    }

    /// Per-row log-density (`n × 1`) of `actions` under `N(mean, diag(exp(log_std))²)`.
    pub fn log_prob<T: Scalar>(&self, tape: &mut Tape<T>, mean: Var, actions: Var) -> Var {
        let action_dim = tape.value(actions).cols();
        let diff = tape.sub(actions, mean);
        let neg_log_std = tape.scale(self.log_std, -T::one());
        let inv_std = tape.exp(neg_log_std);
        let z = tape.mul_row(diff, inv_std);
        let z2 = tape.square(z);
        let quad = tape.sum_cols(z2);
        let quad = tape.scale(quad, T::lit(-0.5));
        let log_det = tape.sum_all(self.log_std);
        let neg_log_det = tape.scale(log_det, -T::one());
        let lp = tape.add_row(quad, neg_log_det);
        let norm = T::lit(-0.5 * action_dim as f64 * (2.0 * std::f64::consts::PI).ln());
        tape.add_scalar(lp, norm)
    }
}

/// `Σ_i [-½((a_i-μ_i)/σ_i)² - log σ_i - ½ log 2π]`.
pub fn diag_gaussian_log_prob<T: Scalar>(mean: &[T], log_std: &[T], action: &[T]) -> T {
    let half = T::lit(0.5);
    let half_log_two_pi = T::lit(0.5 * (2.0 * std::f64::consts::PI).ln());
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((&m, &ls), &a)| {
            let z = (a - m) / ls.exp();
            -half * z * z - ls - half_log_two_pi
        })
        .sum()
}
