//! Differentiable network substrate: tensors, tape, MLP, Gaussian policy, Adam.

pub mod adam;
pub mod checkpoint;
pub mod mlp;
pub mod policy;
pub mod tape;
pub mod tensor;

pub use adam::AdamState;
pub use checkpoint::{load_policy, save_policy, Checkpoint};
pub use mlp::MlpParams;
pub use policy::{GaussianPolicy, PolicyVars, LOG_STD_MAX, LOG_STD_MIN};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Matrix;
