//! `rephase`: command-line front end for the spin self-rephasing toolkit.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{FitKind, Run};
use config::{config_error, ConfigError, RunConfig};
use rephase::{Error, KernelMatrix, KernelSpec};

#[derive(Parser)]
#[command(
    name = "rephase",
    version,
    about = "Spin self-rephasing simulations and fits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the derived rates and regime report as JSON.
    Derive(RunArgs),
    /// Integrate the kinetic equation from coherent spins.
    Simulate(RunArgs),
    /// Integrate the two-class model.
    TwoClass(RunArgs),
    /// Fringe contrast versus Ramsey time for a density sweep.
    Fig3(RunArgs),
    /// One Ramsey fringe scan with its fit.
    RamseyScan(RunArgs),
    /// Fit a `t_or_detuning,value` CSV and print the fit record.
    Fit(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory (overrides output.path).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    grid_points: Option<usize>,
    #[arg(long, value_name = "SECONDS")]
    dt: Option<f64>,
    #[arg(long, value_name = "FLOAT")]
    renorm: Option<f64>,
    /// uniform | oned | matrix:PATH (JSON array of rows)
    #[arg(long, value_name = "KIND")]
    kernel: Option<String>,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    kind: FitKind,
    #[arg(long, value_name = "PATH")]
    input: PathBuf,
    /// Also write the record to DIR/fit_<kind>.json.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Smallest rise above the running minimum that counts as a revival.
    #[arg(long, default_value_t = 0.01)]
    min_rise: f64,
}

fn parse_kernel(s: &str) -> Result<KernelSpec> {
    match s {
        "uniform" | "infinite_range" => Ok(KernelSpec::InfiniteRange),
        "oned" | "one_d" => Ok(KernelSpec::one_d()),
        _ => match s.strip_prefix("matrix:") {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading kernel matrix {path}"))?;
                let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
                    .map_err(|e| config_error(format!("kernel matrix {path}: {e}")))?;
                let matrix = KernelMatrix::from_rows(rows)
                    .map_err(|e| config_error(format!("kernel matrix {path}: {e}")))?;
                Ok(KernelSpec::Matrix { matrix })
            }
            None => Err(config_error(format!(
                "--kernel: unknown `{s}` (expected uniform, oned or matrix:PATH)"
            ))),
        },
    }
}

impl RunArgs {
    fn load(&self) -> Result<Run> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(n) = self.grid_points {
            config.grid.n_points = n;
        }
        if let Some(dt) = self.dt {
            config.times.dt = dt;
        }
        if let Some(r) = self.renorm {
            config.exchange_renorm = r;
        }
        if let Some(k) = &self.kernel {
            config.kernel = parse_kernel(k)?;
        }
        config.validate()?;
        let out = self
            .out
            .clone()
            .unwrap_or_else(|| config.output.path.clone());
        config.output.path = out.clone();
        Ok(Run { config, out })
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Derive(a) => print!("{}", commands::derive(&a.load()?.config)?),
        Command::Simulate(a) => commands::simulate(&a.load()?)?,
        Command::TwoClass(a) => commands::two_class(&a.load()?)?,
        Command::Fig3(a) => commands::fig3(&a.load()?)?,
        Command::RamseyScan(a) => commands::ramsey_scan(&a.load()?)?,
        Command::Fit(a) => {
            let rec = commands::fit(a.kind, &a.input, a.min_rise)?;
            if let Some(dir) = &a.out {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating output directory {}", dir.display()))?;
                let name = match a.kind {
                    FitKind::ExpDecay => "fit_exp_decay.json",
                    FitKind::AtomNumber => "fit_atom_number.json",
                    FitKind::Revival => "fit_revival.json",
                };
                let path = dir.join(name);
                std::fs::write(&path, &rec)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            print!("{rec}");
        }
    }
    Ok(())
}

/// 2: bad config or input, 3: numerical failure, 4: I/O.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io(_) => 4,
                Error::InvalidParameter { .. }
                | Error::LengthMismatch { .. }
                | Error::KernelGrid(_)
                | Error::Parse { .. } => 2,
                _ => 3,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 4;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    3
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
