use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tape::{Tape, Var};
use crate::nn::tensor::{matmul_nt, Matrix};
use crate::scalar::Scalar;

/// Feed-forward network with tanh hidden activations and a linear output.
///
/// `weights[i]` is `out × in` (row-major) and `biases[i]` is `1 × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams<T> {
    pub weights: Vec<Matrix<T>>,
    pub biases: Vec<Matrix<T>>,
    pub hidden_sizes: Vec<usize>,
}

/// Tape handles for one recorded copy of an [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpVars {
    pub weights: Vec<Var>,
    pub biases: Vec<Var>,
}

impl<T: Scalar> MlpParams<T> {
    /// Uniform `±1/√fan_in` initialization.
    pub fn init<R: Rng + ?Sized>(
        input: usize,
        hidden_sizes: &[usize],
        output: usize,
        rng: &mut R,
    ) -> Self {
        let mut dims = Vec::with_capacity(hidden_sizes.len() + 2);
        dims.push(input);
        dims.extend_from_slice(hidden_sizes);
        dims.push(output);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = (0..fan_in * fan_out)
                .map(|_| T::lit(rng.random_range(-bound..bound)))
                .collect();
            let b = (0..fan_out)
                .map(|_| T::lit(rng.random_range(-bound..bound)))
                .collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, w).expect("layer shape"));
            biases.push(Matrix::row_vector(b));
        }
        Self {
            weights,
            biases,
            hidden_sizes: hidden_sizes.to_vec(),
        }
    }

    /// Builds a network from explicit layers, validating conformability.
    pub fn from_layers(weights: Vec<Matrix<T>>, biases: Vec<Matrix<T>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Empty("mlp layers"));
        }
        if weights.len() != biases.len() {
            return Err(Error::dims("mlp bias count", weights.len(), biases.len()));
        }
        for (i, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if b.shape() != (1, w.rows()) {
                return Err(Error::dims(format!("bias of layer {i}"), w.rows(), b.len()));
            }
            if i + 1 < weights.len() && weights[i + 1].cols() != w.rows() {
                return Err(Error::dims(
                    format!("input of layer {}", i + 1),
                    w.rows(),
                    weights[i + 1].cols(),
                ));
            }
            if !w.is_finite() || !b.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("parameters of layer {i}"),
                });
            }
        }
        let hidden_sizes = weights[..weights.len() - 1].iter().map(|w| w.rows()).collect();
        Ok(Self {
            weights,
            biases,
            hidden_sizes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights[0].cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.last().map(Matrix::rows).unwrap_or(0)
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Matrix::len).sum::<usize>()
            + self.biases.iter().map(Matrix::len).sum::<usize>()
    }

    /// Batched forward pass; `x` is `n × input_dim`.
    pub fn forward(&self, x: &Matrix<T>) -> Matrix<T> {
        let last = self.weights.len() - 1;
        let mut h = x.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut y = matmul_nt(&h, w);
            for r in 0..y.rows() {
                for (v, &bi) in y.row_mut(r).iter_mut().zip(b.as_slice()) {
                    *v += bi;
                    if i < last {
                        *v = v.tanh();
                    }
                }
            }
            h = y;
        }
        h
    }

    pub fn record(&self, tape: &mut Tape<T>, trainable: bool) -> MlpVars {
        let mut weights = Vec::with_capacity(self.weights.len());
        let mut biases = Vec::with_capacity(self.biases.len());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if trainable {
                weights.push(tape.param(w.clone()));
                biases.push(tape.param(b.clone()));
            } else {
                weights.push(tape.constant(w.clone()));
                biases.push(tape.constant(b.clone()));
            }
        }
        MlpVars { weights, biases }
    }
}

impl MlpVars {
    pub fn forward<T: Scalar>(&self, tape: &mut Tape<T>, x: Var) -> Var {
        let last = self.weights.len() - 1;
        let mut h = x;
        for (i, (&w, &b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = tape.linear(h, w);
            let z = tape.add_row(z, b);
            h = if i < last { tape.tanh(z) } else { z };
        }
        h
    }
}
