//! Command line front end: argument parsing, dispatch and output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use mmv2v_core::scenario::CONFIG_ENV;
use mmv2v_core::DensityRow;

use commands::{Engine, RunOptions, SweepParameter, SweepSpec};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "mmv2v",
    version,
    about = "Coverage sweeps and simulations for mmWave V2V broadcast"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Scenario TOML file; defaults apply to anything it leaves out.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    /// Override a scenario value, e.g. `--set road.tall_fraction=0.2`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, global = true, value_enum, default_value_t = Engine::Analytic)]
    pub engine: Engine,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extra path loss of blockers and blockage probabilities vs distance.
    BlockageCurve {
        #[arg(long, default_value = "1:200:1")]
        distances: String,
    },
    /// Expected covered receivers over a parameter grid and density rows.
    CoverageSweep {
        #[arg(long, value_enum, default_value_t = SweepParameter::Beamwidth)]
        parameter: SweepParameter,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "10:360:10")]
        values: String,
        #[arg(long, default_value = "low,intermediate,high")]
        rows: String,
    },
    /// Empirical CDF of each trial's strongest receiver SINRs (simulation).
    SinrCdf {
        #[arg(long, default_value = "10,20,30,40")]
        beamwidths: String,
        /// SINR grid in dB at which the CDF is sampled.
        #[arg(long, default_value = "-20:120:0.5")]
        grid: String,
    },
    /// Coverage, transmitter density and their product vs carrier-sense range.
    CsSweep {
        #[arg(long, default_value = "10:150:10")]
        ranges: String,
        #[arg(long, default_value = "intermediate")]
        rows: String,
    },
    /// One simulation campaign on the configured scenario.
    Simulate {
        /// Also write one JSON line per trial here.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Render a CSV produced by another command as SVG.
    Plot { input: PathBuf },
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::io(p.display(), e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io("stdout", e))
        }
    }
}

fn rows(spec: &str) -> CliResult<Vec<DensityRow>> {
    config::parse_rows(spec)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    let out = g.out.as_deref();
    if let Command::Plot { input } = &cli.command {
        let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input.display(), e))?;
        return emit(out, plot::plot_csv(&text)?.as_bytes());
    }
    let scenario = config::load_scenario(g.config.as_deref(), &g.overrides)?;
    let opts = RunOptions {
        seed: g.seed,
        trials: g.trials,
        engine: g.engine,
    };
    let table = match &cli.command {
        Command::BlockageCurve { distances } => {
            commands::blockage_curve(&scenario, &config::parse_grid(distances)?)?
        }
        Command::CoverageSweep {
            parameter,
            values,
            rows: r,
        } => {
            let spec = SweepSpec {
                parameter: *parameter,
                values: if *parameter == SweepParameter::DensityRow {
                    Vec::new()
                } else {
                    config::parse_grid(values)?
                },
                rows: rows(r)?,
            };
            let outcomes = commands::coverage_sweep(&scenario, &spec, &opts)?;
            commands::coverage_table(&scenario, &spec, &opts, &outcomes)
        }
        Command::SinrCdf { beamwidths, grid } => {
            let curves = commands::sinr_cdf(&scenario, &config::parse_grid(beamwidths)?, &opts)?;
            commands::sinr_cdf_table(&scenario, &opts, &config::parse_grid(grid)?, &curves)
        }
        Command::CsSweep { ranges, rows: r } => {
            let outcomes =
                commands::cs_sweep(&scenario, &config::parse_grid(ranges)?, &rows(r)?, &opts)?;
            commands::cs_table(&scenario, &opts, &outcomes)
        }
        Command::Simulate { records } => {
            let (table, stats) = commands::simulate(&scenario, &opts)?;
            if let Some(path) = records {
                let file =
                    std::fs::File::create(path).map_err(|e| CliError::io(path.display(), e))?;
                mmv2v_core::sim::write_records(std::io::BufWriter::new(file), &stats)
                    .map_err(|e| CliError::io(path.display(), e))?;
            }
            table
        }
        Command::Plot { .. } => unreachable!("handled above"),
    };
    emit(out, table.to_csv().as_bytes())
}
