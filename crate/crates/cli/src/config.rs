use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use prefine_core::align::{AlignConfig, BcConfig, CounterfactualStrategy};
use prefine_core::envs::EnvName;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    #[default]
    Prefine,
    Ppl,
    Bc,
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Prefine => "prefine",
            Baseline::Ppl => "ppl",
            Baseline::Bc => "bc",
        })
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "prefine" => Ok(Baseline::Prefine),
            "ppl" | "dpo" => Ok(Baseline::Ppl),
            "bc" => Ok(Baseline::Bc),
            other => Err(format!("unknown baseline `{other}` (expected prefine, ppl or bc)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub n_rollouts: usize,
    pub cvar_alpha: f64,
    /// Rollout seeds start at `seed_offset + run seed`.
    pub seed_offset: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_rollouts: 100,
            cvar_alpha: 0.9,
            seed_offset: 100_000,
        }
    }
}

/// Resolved settings for every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub env: String,
    pub dataset: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    pub out: PathBuf,
    /// Trajectories to synthesize.
    pub n: usize,
    /// Seed for synthesis and behavior cloning.
    pub seed: u64,
    /// Cost thresholds; empty means the environment defaults.
    pub taus: Vec<f64>,
    pub n_p: usize,
    pub n_np: usize,
    pub seeds: Vec<u64>,
    pub baseline: Baseline,
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    pub align: AlignConfig,
    pub bc: BcConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: EnvName::SpeedLimit1D.as_str().to_string(),
            dataset: None,
            reference: None,
            out: PathBuf::from("output"),
            n: 500,
            seed: 7,
            taus: Vec::new(),
            n_p: 100,
            n_np: 20,
            seeds: vec![0, 1, 2, 3, 4],
            baseline: Baseline::Prefine,
            lambdas: vec![0.0, 0.1, 1.0, 1.6, 2.0],
            betas: vec![0.05, 0.2, 0.6, 0.95],
            align: AlignConfig::default(),
            bc: BcConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

/// Flags shared by all subcommands; any flag given wins over the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<String>,
    /// Trajectory corpus (JSON lines).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Reference policy checkpoint.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of trajectories to synthesize.
    #[arg(long)]
    pub n: Option<usize>,
    /// Cost thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub tau: Option<Vec<f64>>,
    #[arg(long = "np")]
    pub n_p: Option<usize>,
    #[arg(long = "nnp")]
    pub n_np: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Counterfactual source: policy or mixed.
    #[arg(long)]
    pub strategy: Option<CounterfactualStrategy>,
    #[arg(long)]
    pub baseline: Option<Baseline>,
    /// Synthesis / cloning seed; also the single run seed when --seeds is absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub eval_rollouts: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    /// Defaults, overlaid by the config file, overlaid by flags.
    pub fn resolve(flags: &Flags) -> CliResult<Self> {
        let mut cfg = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|_| CliError::MissingInput {
                    what: "config file",
                    path: path.display().to_string(),
                })?;
                Self::from_toml(&text, path)?
            }
            None => Self::default(),
        };
        macro_rules! set {
            ($flag:expr => $($field:tt)+) => {
                if let Some(v) = $flag.clone() {
                    cfg.$($field)+ = v;
                }
            };
        }
        set!(flags.env => env);
        if flags.dataset.is_some() {
            cfg.dataset = flags.dataset.clone();
        }
        if flags.reference.is_some() {
            cfg.reference = flags.reference.clone();
        }
        set!(flags.out => out);
        set!(flags.n => n);
        set!(flags.tau => taus);
        set!(flags.n_p => n_p);
        set!(flags.n_np => n_np);
        set!(flags.beta => align.beta);
        set!(flags.lambda => align.lambda);
        set!(flags.lr => align.lr);
        set!(flags.batch => align.batch_size);
        set!(flags.iterations => align.iterations);
        set!(flags.epochs => bc.epochs);
        set!(flags.strategy => align.strategy);
        set!(flags.baseline => baseline);
        set!(flags.seed => seed);
        set!(flags.eval_rollouts => eval.n_rollouts);
        set!(flags.lambdas => lambdas);
        set!(flags.betas => betas);
        match (&flags.seeds, flags.seed) {
            (Some(s), _) => cfg.seeds = s.clone(),
            (None, Some(s)) => cfg.seeds = vec![s],
            _ => {}
        }
        cfg.env_name()?;
        if cfg.seeds.is_empty() {
            return Err(CliError::Usage("seed list must not be empty".into()));
        }
        Ok(cfg)
    }

    pub fn env_name(&self) -> CliResult<EnvName> {
        Ok(self.env.parse::<EnvName>()?)
    }

    pub fn taus(&self) -> CliResult<Vec<f64>> {
        if self.taus.is_empty() {
            Ok(self.env_name()?.default_taus().to_vec())
        } else if self.taus.iter().any(|t| !(*t > 0.0)) {
            Err(CliError::Usage(format!("tau values must be positive, got {:?}", self.taus)))
        } else {
            Ok(self.taus.clone())
        }
    }

    pub fn env_dir(&self) -> CliResult<PathBuf> {
        Ok(self.out.join(self.env_name()?.as_str()))
    }

    pub fn dataset_path(&self) -> CliResult<PathBuf> {
        match &self.dataset {
            Some(p) => Ok(p.clone()),
            None => Ok(self.env_dir()?.join("dataset.jsonl")),
        }
    }

    pub fn reference_path(&self) -> CliResult<PathBuf> {
        match &self.reference {
            Some(p) => Ok(p.clone()),
            None => Ok(self.env_dir()?.join("reference.json")),
        }
    }

    pub fn run_dir(&self, tau: f64, seed: u64) -> CliResult<PathBuf> {
        Ok(self.env_dir()?.join(format!("{tau}")).join(seed.to_string()))
    }
}

/// File-name stem for a trained method.
pub fn method_label(baseline: Baseline, strategy: CounterfactualStrategy) -> String {
    match (baseline, strategy) {
        (Baseline::Bc, _) => "bc".into(),
        (b, CounterfactualStrategy::PolicySampled) => b.to_string(),
        (b, CounterfactualStrategy::Mixed) => format!("{b}_mixed"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_beats_file_beats_default() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "n_p = 50\nseeds = [3, 4]\n[align]\nbeta = 0.2\niterations = 10\n").unwrap();
        let flags = Flags {
            config: Some(path),
            iterations: Some(99),
            ..Flags::default()
        };
        let cfg = RunConfig::resolve(&flags).unwrap();
        assert_eq!(cfg.align.iterations, 99);
        assert_eq!(cfg.align.beta, 0.2);
        assert_eq!(cfg.n_p, 50);
        assert_eq!(cfg.seeds, vec![3, 4]);
        assert_eq!(cfg.n_np, 20);
        assert_eq!(cfg.align.lambda, 1.6);
    }

    #[test]
    fn single_seed_flag_sets_seed_list() {
        let cfg = RunConfig::resolve(&Flags { seed: Some(9), ..Flags::default() }).unwrap();
        assert_eq!(cfg.seeds, vec![9]);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let bad_env = Flags { env: Some("cartpole".into()), ..Flags::default() };
        assert_eq!(RunConfig::resolve(&bad_env).unwrap_err().exit_code(), 2);
        let no_seeds = Flags { seeds: Some(vec![]), ..Flags::default() };
        assert_eq!(RunConfig::resolve(&no_seeds).unwrap_err().exit_code(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.toml");
        std::fs::write(&path, "unknown_key = 1\n").unwrap();
        let flags = Flags { config: Some(path), ..Flags::default() };
        assert!(matches!(RunConfig::resolve(&flags), Err(CliError::Config { .. })));
    }

    #[test]
    fn default_taus_and_labels() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.taus().unwrap(), vec![10.0, 15.0, 20.0]);
        assert_eq!(cfg.run_dir(15.0, 2).unwrap(), PathBuf::from("output/speedlimit1d/15/2"));
        assert_eq!(method_label(Baseline::Prefine, CounterfactualStrategy::Mixed), "prefine_mixed");
        assert_eq!(method_label(Baseline::Bc, CounterfactualStrategy::Mixed), "bc");
        assert_eq!(method_label(Baseline::Ppl, CounterfactualStrategy::PolicySampled), "ppl");
    }
}
