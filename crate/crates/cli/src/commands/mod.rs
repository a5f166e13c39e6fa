mod evaluate;
mod finetune;
mod pretrain;
mod sweep;
mod synth;

use std::fs;
use std::path::Path;

use prefine_core::data::load_trajectories;
use prefine_core::nn::load_policy;
use prefine_core::{GaussianPolicy, Trajectory};
use serde::Serialize;

use crate::error::{CliError, CliResult};

pub use evaluate::{evaluate, TableRow, METHODS};
pub use finetune::{finetune, train_method};
pub use pretrain::pretrain;
pub use sweep::{sweep, RescoreRow, SweepOutput, SweepRow};
pub use synth::synth;

pub(crate) fn load_corpus(path: &Path) -> CliResult<Vec<Trajectory>> {
    if !path.is_file() {
        return Err(CliError::MissingInput {
            what: "dataset",
            path: path.display().to_string(),
        });
    }
    Ok(load_trajectories(path)?)
}

pub(crate) fn load_checkpoint(path: &Path, what: &'static str) -> CliResult<GaussianPolicy> {
    if !path.is_file() {
        return Err(CliError::MissingInput {
            what,
            path: path.display().to_string(),
        });
    }
    Ok(load_policy(path)?)
}

pub(crate) fn ensure_parent(path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

pub(crate) fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> CliResult<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(prefine_core::Error::from)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub(crate) fn write_jsonl<S: Serialize>(path: &Path, rows: &[S]) -> CliResult<()> {
    ensure_parent(path)?;
    let mut text = String::new();
    for row in rows {
        text.push_str(&serde_json::to_string(row).map_err(prefine_core::Error::from)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

/// Min / median / max of `values` (upper median for even counts).
pub(crate) fn min_median_max(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (v[0], v[v.len() / 2], v[v.len() - 1])
}
