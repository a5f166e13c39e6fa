use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::policy::GaussianPolicy;
use crate::nn::tape::Gradients;
use crate::nn::tensor::Matrix;
use crate::scalar::Scalar;

pub const DEFAULT_LR: f64 = 3e-4;

/// Adam moments for a fixed list of parameter tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    first_moment: Vec<Matrix<T>>,
    second_moment: Vec<Matrix<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a, I>(shapes: I, lr: T) -> Self
    where
        I: IntoIterator<Item = &'a Matrix<T>>,
    {
        let zeros: Vec<Matrix<T>> = shapes
            .into_iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect();
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn for_policy(policy: &GaussianPolicy<T>, lr: T) -> Self {
        Self::new(policy.tensors(), lr)
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut Matrix<T>], grads: &[Matrix<T>]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::dims(
                "adam parameter list",
                self.first_moment.len(),
                params.len().min(grads.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != self.first_moment[i].shape() || g.shape() != p.shape() {
                return Err(Error::dims(
                    format!("adam tensor {i}"),
                    self.first_moment[i].len(),
                    g.len(),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let one = T::one();
        let bc1 = one - self.beta1.powi(t);
        let bc2 = one - self.beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            for (((pi, &gi), mi), vi) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *mi = self.beta1 * *mi + (one - self.beta1) * gi;
                *vi = self.beta2 * *vi + (one - self.beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *pi -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

impl<T: Scalar> GaussianPolicy<T> {
    /// Adam update followed by re-clamping `log_std`.
    pub fn adam_step(&mut self, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<()> {
        let mut params = self.tensors_mut();
        state.step(&mut params, &grads.slots)?;
        self.clamp_log_std();
        Ok(())
    }
}
