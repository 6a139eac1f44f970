//! `lhvbell`: fit, test and simulate polarization-correlation data.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod error;
mod output;
mod reproduce;

use error::CliError;
use output::Sink;

#[derive(Parser)]
#[command(name = "lhvbell", version, about = "Cosine-law fits, LHV inequality tests and model simulation")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Suppress stdout and the stderr manifest.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Debug)]
#[group(required = true, multiple = false)]
pub struct InputArgs {
    /// Dataset CSV with columns angle_deg, rate, sigma.
    pub input: Option<PathBuf>,
    /// Use the built-in eight-angle reference table.
    #[arg(long)]
    pub builtin: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    InverseVariance,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NoiseArg {
    BernoulliCounts,
    PoissonRates,
}

#[derive(Subcommand)]
enum Command {
    /// Fit R(φ) = ⟨R⟩[1 + V cos(2φ + ψ)] and write a plot series.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// Angles (degrees) to leave out of the fit.
        #[arg(long, value_delimiter = ',', value_name = "DEG")]
        exclude_deg: Vec<f64>,
        #[arg(long, value_enum, default_value = "uniform")]
        weighting: WeightingArg,
    },
    /// Test Δ_exp against the LHV bound D(η).
    Inequality {
        #[command(flatten)]
        input: InputArgs,
        /// Detection efficiency; defaults to the family's nominal value.
        #[arg(long)]
        eta: Option<f64>,
        /// Family under test, LHV0 to LHV4.
        #[arg(long, default_value = "LHV1")]
        family: String,
        /// Resamples behind the Δ_exp sigma; 0 skips it.
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        /// Seed of the resampling streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Significance multiplier for the verdict.
        #[arg(long, default_value_t = 3.0)]
        k: f64,
    },
    /// Evaluate a model file by quadrature.
    Model {
        /// Model JSON file.
        model: PathBuf,
        #[command(flatten)]
        angles: AngleArgs,
        /// Pair production rate R0 multiplying p12.
        #[arg(long, default_value_t = 10_000.0)]
        production_rate: f64,
    },
    /// Simulate coincidence counts from a model or the cosine law.
    Simulate {
        /// Model file; omit when using --quantum.
        #[arg(required_unless_present_any = ["quantum", "config"])]
        model: Option<PathBuf>,
        /// Cosine-law source instead of a model: visibility, phase in degrees, mean rate.
        #[arg(long, num_args = 3, value_names = ["V", "PSI_DEG", "MEAN"], allow_negative_numbers = true, conflicts_with = "model")]
        quantum: Option<Vec<f64>>,
        /// Emitted pairs per angle; with --quantum, the binomial trials per angle.
        #[arg(long)]
        pairs: Option<u64>,
        /// Seed of the simulation streams.
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        angles: AngleArgs,
        /// Fixed pair count per angle, or Poisson-distributed pair count.
        #[arg(long, value_enum)]
        noise: Option<NoiseArg>,
        /// Simulation config JSON; flags override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Rerun the full analysis of the reference table.
    Reproduce {
        /// Resamples behind the Δ_exp sigma.
        #[arg(long, default_value_t = 10_000)]
        resamples: usize,
        /// Seed of the resampling streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Clone, Debug, Default)]
pub struct AngleArgs {
    /// Explicit polarizer differences in degrees.
    #[arg(long, value_delimiter = ',', value_name = "DEG", conflicts_with = "grid")]
    pub angles_deg: Option<Vec<f64>>,
    /// Uniform grid of n angles 180°·k/n.
    #[arg(long)]
    pub grid: Option<usize>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let sink = Sink { out: cli.out, quiet: cli.quiet, json: cli.json };
    match cli.command {
        Command::Fit { input, exclude_deg, weighting } => commands::fit(&sink, &input, &exclude_deg, weighting),
        Command::Inequality { input, eta, family, resamples, seed, k } => {
            commands::inequality(&sink, &input, eta, &family, resamples, seed, k)
        }
        Command::Model { model, angles, production_rate } => commands::model(&sink, &model, &angles, production_rate),
        Command::Simulate { model, quantum, pairs, seed, angles, noise, config } => {
            commands::simulate(&sink, commands::SimulateArgs { model, quantum, pairs, seed, angles, noise, config })
        }
        Command::Reproduce { resamples, seed } => reproduce::run(&sink, resamples, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
