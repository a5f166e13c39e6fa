//! Offline safety alignment of pretrained Gaussian policies.
//!
//! Pipeline: synthesize or load a trajectory corpus from a toy constrained
//! MDP ([`envs`]), pretrain a reference policy by behavior cloning, build
//! preferred / non-preferred trajectory sets ([`data`]), fine-tune with the
//! hybrid preference + supervised objective ([`align`]) and score the result
//! with normalized reward, normalized cost and CVaR ([`eval`]).
//!
//! Numeric code is generic over [`Scalar`] (`f32`/`f64`); the aliases below
//! fix the training default of `f64`.

pub mod align;
pub mod data;
pub mod envs;
pub mod error;
pub mod eval;
pub mod nn;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type.
pub type Real = f64;

pub type Matrix = nn::Matrix<Real>;
pub type GaussianPolicy = nn::GaussianPolicy<Real>;
pub type MlpParams = nn::MlpParams<Real>;
pub type Tape = nn::Tape<Real>;
pub type AdamState = nn::AdamState<Real>;
pub type CmdpSpec = envs::CmdpSpec<Real>;
pub type Trajectory = envs::Trajectory<Real>;
pub type PreferenceDatasets = data::PreferenceDatasets<Real>;
pub type StateIndex = data::StateIndex<Real>;
pub type PreferenceTriple = align::PreferenceTriple<Real>;
pub use eval::EvalReport;
