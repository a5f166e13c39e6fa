use prefine_core::data::save_trajectories;
use prefine_core::envs::{default_mix, make_env, synthesize_dataset};

use super::{ensure_parent, min_median_max};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Writes a synthetic corpus and prints its cost / reward spread.
pub fn synth(cfg: &RunConfig) -> CliResult<()> {
    if cfg.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let name = cfg.env_name()?;
    let env = make_env(name, cfg.seed);
    let corpus = synthesize_dataset(&env, cfg.n, &default_mix(name), cfg.seed)?;
    let path = cfg.dataset_path()?;
    ensure_parent(&path)?;
    save_trajectories(&path, &corpus)?;
    let costs: Vec<f64> = corpus.iter().map(|t| t.cumulative_cost).collect();
    let rewards: Vec<f64> = corpus.iter().map(|t| t.cumulative_reward).collect();
    let (c0, c1, c2) = min_median_max(&costs);
    let (r0, r1, r2) = min_median_max(&rewards);
    println!("wrote {} trajectories to {}", corpus.len(), path.display());
    println!("cost   min {c0:.3} median {c1:.3} max {c2:.3}");
    println!("reward min {r0:.3} median {r1:.3} max {r2:.3}");
    Ok(())
}
