//! Normalized reward / cost, CVaR and evaluation reports.

mod metrics;
mod report;

pub use metrics::{cvar, normalized_cost, normalized_reward, safety_fraction, NormalizationStats};
pub use report::{evaluate, EvalReport, EvalSettings, DEFAULT_CVAR_ALPHA, DEFAULT_EPSILON};
