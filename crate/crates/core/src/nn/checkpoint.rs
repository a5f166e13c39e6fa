//! JSON parameter checkpoints.
//!
//! Numbers are written with the shortest representation that parses back
//! to the same `f64`, so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::MlpParams;
use crate::nn::policy::GaussianPolicy;
use crate::nn::tensor::Matrix;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub state_dim: usize,
    pub action_dim: usize,
    pub hidden_sizes: Vec<usize>,
    /// One flat row-major `out × in` buffer per layer.
    pub layer_weights: Vec<Vec<f64>>,
    pub layer_biases: Vec<Vec<f64>>,
    pub log_std: Vec<f64>,
    pub rng_seed: u64,
}

impl Checkpoint {
    pub fn from_policy<T: Scalar>(policy: &GaussianPolicy<T>, rng_seed: u64) -> Self {
        let flat = |m: &Matrix<T>| m.as_slice().iter().map(|v| v.as_f64()).collect();
        Self {
            format_version: CHECKPOINT_FORMAT_VERSION,
            state_dim: policy.state_dim(),
            action_dim: policy.action_dim(),
            hidden_sizes: policy.trunk.hidden_sizes.clone(),
            layer_weights: policy.trunk.weights.iter().map(flat).collect(),
            layer_biases: policy.trunk.biases.iter().map(flat).collect(),
            log_std: flat(&policy.log_std),
            rng_seed,
        }
    }

    pub fn to_policy<T: Scalar>(&self) -> Result<GaussianPolicy<T>> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        let mut dims = vec![self.state_dim];
        dims.extend_from_slice(&self.hidden_sizes);
        dims.push(self.action_dim);
        let layers = dims.len() - 1;
        if self.layer_weights.len() != layers || self.layer_biases.len() != layers {
            return Err(Error::dims("checkpoint layer count", layers, self.layer_weights.len()));
        }
        let conv = |v: &[f64]| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for (i, pair) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            weights.push(Matrix::from_vec(fan_out, fan_in, conv(&self.layer_weights[i]))?);
            if self.layer_biases[i].len() != fan_out {
                return Err(Error::dims(
                    format!("checkpoint bias {i}"),
                    fan_out,
                    self.layer_biases[i].len(),
                ));
            }
            biases.push(Matrix::row_vector(conv(&self.layer_biases[i])));
        }
        let trunk = MlpParams::from_layers(weights, biases)?;
        GaussianPolicy::from_parts(trunk, conv(&self.log_std))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn save_policy<T: Scalar>(
    policy: &GaussianPolicy<T>,
    rng_seed: u64,
    path: impl AsRef<Path>,
) -> Result<()> {
    Checkpoint::from_policy(policy, rng_seed).save(path)
}

pub fn load_policy<T: Scalar>(path: impl AsRef<Path>) -> Result<GaussianPolicy<T>> {
    Checkpoint::load(path)?.to_policy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #[test]
        fn json_round_trip_is_bit_exact(seed in any::<u64>(), scale in 1e-300f64..1e300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut p = GaussianPolicy::<f64>::new(3, 2, &[4, 5], -1.3, &mut rng);
            for m in p.tensors_mut().into_iter().take(2) {
                for v in m.as_mut_slice() { *v *= scale; }
            }
            let ck = Checkpoint::from_policy(&p, seed);
            let back: GaussianPolicy<f64> = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().to_policy().unwrap();
            prop_assert_eq!(back.checksum(), p.checksum());
        }
    }

    #[test]
    fn rejects_wrong_layer_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = GaussianPolicy::<f64>::new(2, 1, &[3], 0.0, &mut rng);
        let mut ck = Checkpoint::from_policy(&p, 1);
        ck.layer_weights[1].pop();
        assert!(ck.to_policy::<f64>().is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = GaussianPolicy::<f64>::new(2, 1, &[3], 0.0, &mut rng);
        save_policy(&p, 2, &path).unwrap();
        let q: GaussianPolicy<f64> = load_policy(&path).unwrap();
        assert_eq!(p, q);
    }
}
