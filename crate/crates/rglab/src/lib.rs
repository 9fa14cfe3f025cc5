//! Command-line runner for the gene-list robustness experiments.
//!
//! ```text
//! rglab figure1|figure2|check-independence|asymptotic-cov|sample-size
//!       [--config FILE] [--seed N] [--out DIR] [--workers N]
//!       [--mode paper_literal|synthetic] [--scale raw|fisher] [--json]
//! ```
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage or
//! configuration errors.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use rglab_core::selection::{ApproxMode, SigmaScale};

use crate::commands::RunReport;
use crate::config::{CommandKind, Overrides, Workers, WORKERS_ENV};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rglab", version, about = "Reproducible gene-list robustness experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub options: GlobalOptions,
}

#[derive(Debug, Args)]
pub struct GlobalOptions {
    /// Flat TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Root seed; overrides `seed` in the file.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads, or "auto". Defaults to $RGLAB_WORKERS.
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<Workers>,
    #[arg(long, global = true, value_name = "paper_literal|synthetic")]
    pub mode: Option<ApproxMode>,
    #[arg(long, global = true, value_name = "raw|fisher")]
    pub scale: Option<SigmaScale>,
    /// Print the machine-readable summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Histogram and normal QQ data for the Fisher-transformed correlations.
    Figure1,
    /// Straightforward and approximated overlap estimates across sample sizes.
    Figure2,
    /// Whether two target correlations admit asymptotically independent estimates.
    #[command(allow_negative_numbers = true)]
    CheckIndependence {
        rho1: f64,
        rho2: f64,
        /// Correlation between the two features.
        rho_x1x2: Option<f64>,
    },
    /// Asymptotic covariance of the Fisher-transformed sample correlations.
    AsymptoticCov,
    /// Smallest sample size meeting a list-overlap target.
    SampleSize,
}

fn overrides(o: &GlobalOptions) -> Overrides {
    Overrides { seed: o.seed, out: o.out.clone(), workers: o.workers, mode: o.mode, scale: o.scale }
}

fn report_files(report: &RunReport, json: bool, out: &mut dyn Write) -> Result<(), CliError> {
    if json {
        out.write_all(output::render_json(&report.summary).as_bytes())?;
    } else {
        for f in &report.files {
            writeln!(out, "wrote {}", f.display())?;
        }
    }
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let opts = &cli.options;
    let env_workers = std::env::var(WORKERS_ENV).ok();
    let load = |kind| config::load(opts.config.as_deref(), &overrides(opts), env_workers.as_deref(), kind);
    match &cli.command {
        Command::CheckIndependence { rho1, rho2, rho_x1x2 } => {
            let report = commands::check_independence(*rho1, *rho2, *rho_x1x2)?;
            if opts.json {
                out.write_all(output::render_json(&report.to_json()).as_bytes())?;
            } else {
                out.write_all(report.to_text().as_bytes())?;
            }
            Ok(())
        }
        Command::Figure1 => report_files(&commands::run_figure1(&load(CommandKind::Figure1)?)?, opts.json, out),
        Command::Figure2 => report_files(&commands::run_figure2(&load(CommandKind::Figure2)?)?, opts.json, out),
        Command::AsymptoticCov => {
            if opts.config.is_none() {
                return Err(CliError::Config("asymptotic-cov needs --config with a covariance matrix".into()));
            }
            report_files(&commands::run_asymptotic_cov(&load(CommandKind::AsymptoticCov)?)?, opts.json, out)
        }
        Command::SampleSize => {
            report_files(&commands::run_sample_size(&load(CommandKind::SampleSize)?)?, opts.json, out)
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Normal output goes to `out`, diagnostics to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("rglab: error: {e}");
            e.exit_code()
        }
    }
}
