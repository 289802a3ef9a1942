//! `fnmix`: function-specific mixing times, concentration bounds, intervals
//! and sequential tests for finite reversible Markov chains.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod input;
mod output;
mod reproduce;
mod zoo;

use std::process::ExitCode;

use anyhow::Result;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use fnmix_core::discrepancy::DEFAULT_N_MAX;
use serde::Serialize;

use commands::{DiscrepancyArgs, HoeffdingArgs, IntervalArgs, MixingTimeArgs, SeqTestArgs, SimulateArgs, SpectrumArgs};
use output::{emit, render, Report};
use reproduce::ReproduceArgs;
use zoo::ZooArgs;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "fnmix",
    version,
    about = "Function-specific mixing times of finite reversible Markov chains"
)]
struct Cli {
    /// Cap n_max on the number of steps scanned by mixing-time searches
    #[arg(long = "n-max", env = "FNMIX_NMAX", global = true, default_value_t = DEFAULT_N_MAX)]
    n_max: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Eigenvalues, spectral gaps gamma_* and gamma_0, pi_min, and the f-spectrum J_f
    Spectrum(SpectrumArgs),
    /// Worst-start f-discrepancy d_f(n) against the oracle, sharper, f-gap and uniform bounds
    Discrepancy(DiscrepancyArgs),
    /// f-mixing time T_f(delta) and its bounds
    MixingTime(MixingTimeArgs),
    /// Hoeffding-type tail bounds for the ergodic average
    Hoeffding(HoeffdingArgs),
    /// Confidence interval for the stationary mean mu = E_pi[f]
    Interval(IntervalArgs),
    /// Sequential test of mu against a threshold r
    Seqtest(SeqTestArgs),
    /// Write a chain file for a built-in example chain
    Zoo(ZooArgs),
    /// Monte Carlo replicates of the ergodic average
    Simulate(SimulateArgs),
    /// Plot-ready data for the worked examples
    Reproduce(ReproduceArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spectrum(_) => "spectrum",
            Command::Discrepancy(_) => "discrepancy",
            Command::MixingTime(_) => "mixing-time",
            Command::Hoeffding(_) => "hoeffding",
            Command::Interval(_) => "interval",
            Command::Seqtest(_) => "seqtest",
            Command::Zoo(_) => "zoo",
            Command::Simulate(_) => "simulate",
            Command::Reproduce(_) => "reproduce",
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let config = serde_json::to_value(cli)?;
    let name = cli.command.name();
    let n_max = cli.n_max;
    let write = |report: Report, out: &output::OutArgs| -> Result<()> {
        emit(&render(name, &config, &report, out.format)?, out.out.as_ref())
    };
    match &cli.command {
        Command::Spectrum(a) => write(commands::spectrum(a, n_max)?, &a.out),
        Command::Discrepancy(a) => write(commands::discrepancy(a, n_max)?, &a.out),
        Command::MixingTime(a) => write(commands::mixing_time(a, n_max)?, &a.out),
        Command::Hoeffding(a) => write(commands::hoeffding(a, n_max)?, &a.out),
        Command::Interval(a) => write(commands::interval(a, n_max)?, &a.out),
        Command::Seqtest(a) => write(commands::seqtest(a, n_max)?, &a.out),
        Command::Simulate(a) => write(commands::simulate(a, n_max)?, &a.out),
        Command::Zoo(a) => emit(&zoo::zoo(a, config.clone())?, a.out.as_ref()),
        Command::Reproduce(a) => {
            let report = reproduce::reproduce(a, n_max)?;
            emit(&render(name, &config, &report, a.format)?, a.out.as_ref())
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<fnmix_core::Error>() {
        Some(e) if e.is_precondition() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
