//! `prefine` command-line front end: corpus synthesis, reference
//! pretraining, preference fine-tuning, evaluation and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use config::{Baseline, Flags, RunConfig};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "prefine", version, about = "Offline preference fine-tuning for safe control policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a trajectory corpus from scripted behaviors.
    Synth(Flags),
    /// Behavior-clone the reference policy from the top-return trajectories.
    Pretrain(Flags),
    /// Fine-tune the reference policy for every threshold and seed.
    Finetune(Flags),
    /// Score reference and trained policies and write the comparison table.
    Evaluate(Flags),
    /// Grid over the supervised weight and preference sharpness.
    Sweep(Flags),
}

impl Command {
    fn flags(&self) -> &Flags {
        match self {
            Command::Synth(f)
            | Command::Pretrain(f)
            | Command::Finetune(f)
            | Command::Evaluate(f)
            | Command::Sweep(f) => f,
        }
    }
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = RunConfig::resolve(cli.command.flags())?;
    match cli.command {
        Command::Synth(_) => commands::synth(&cfg),
        Command::Pretrain(_) => commands::pretrain(&cfg),
        Command::Finetune(_) => commands::finetune(&cfg),
        Command::Evaluate(_) => commands::evaluate(&cfg).map(drop),
        Command::Sweep(_) => commands::sweep(&cfg).map(drop),
    }
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
