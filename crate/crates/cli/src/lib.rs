//! Front end for `privhyp`: reads an experiment config, designs mechanisms,
//! reproduces the designed-versus-optimal comparison as CSV and checks
//! finite-sample error exponents.
//!
//! Exit codes: 2 for invalid input, 3 when the designed mechanism has a
//! negative entry, 4 when a solver fails, 5 when verification fails.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{
    compare, design, load_mechanism, measure, verify, write_csv, DesignReport, ExponentCheck,
    MeasureReport, MechanismFile, VerifyReport, CSV_COLUMNS,
};
pub use config::{Budgets, ExperimentConfig, Overrides, Sweep};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "privhyp", version, about = "Privacy mechanisms for hypothesis testing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a mechanism and report its utility, leakage and KKT residuals.
    Design(RunArgs),
    /// Compare designed and optimal 2x2 mechanisms over a budget sweep (CSV).
    Compare(RunArgs),
    /// Check finite-sample error exponents of a mechanism.
    Verify(RunArgs),
    /// Evaluate divergences and leakage.
    Measure(MeasureArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; falls back to the config's `output`, then stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "grid-step")]
    pub grid_step: Option<f64>,
    /// `kl` or `renyi:<alpha>`.
    #[arg(long)]
    pub utility: Option<String>,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<f64>>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Mechanism file for `I(p, W)`.
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        cfg.apply(&Overrides {
            seed: self.seed,
            grid_step: self.grid_step,
            utility: self.utility.clone(),
        })?;
        Ok(cfg)
    }

    fn target(&self, cfg: &ExperimentConfig) -> Option<PathBuf> {
        self.out.clone().or_else(|| cfg.output.clone())
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|source| CliError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            }),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s.into_bytes()
}

/// Run one subcommand, writing its output.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Design(args) => {
            let cfg = args.load()?;
            let (report, _) = design(&cfg)?;
            emit(args.target(&cfg).as_deref(), &to_json(&report))
        }
        Command::Compare(args) => {
            let cfg = args.load()?;
            let rows = compare(&cfg)?;
            let mut buf = Vec::new();
            write_csv(&rows, &mut buf)?;
            emit(args.target(&cfg).as_deref(), &buf)
        }
        Command::Verify(args) => {
            let cfg = args.load()?;
            let report = verify(&cfg)?;
            emit(args.target(&cfg).as_deref(), &to_json(&report))?;
            if report.passed {
                Ok(())
            } else {
                Err(CliError::VerifyFailed {
                    failed: report.checks.iter().filter(|c| !c.pass).count(),
                    total: report.checks.len(),
                })
            }
        }
        Command::Measure(args) => {
            let w = args.mechanism.as_deref().map(load_mechanism).transpose()?;
            let report = measure(&args.p, args.q.as_deref(), args.alpha, w.as_ref())?;
            emit(args.out.as_deref(), &to_json(&report))
        }
    }
}
