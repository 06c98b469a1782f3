//! `awt`: preprocess station CSVs, cluster them, and evaluate the results.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
//! Log verbosity comes from `AWT_LOG` (default `warn`).

mod commands;
mod error;
mod files;
mod ingest;

use std::path::PathBuf;
use std::process::ExitCode;

use awt_core::pipeline::{AwtConfig, Mode};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "awt",
    version,
    about = "Threshold-driven wavelet clustering of station time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Filter, gap-fill, height-correct and z-scale a long-format CSV.
    Preprocess(PreprocessArgs),
    /// Cluster a panel file.
    Cluster(ClusterArgs),
    /// NMI between two results, or a resolution study for one result.
    Evaluate(EvaluateArgs),
    /// CF-tree leaf count over a grid of thresholds.
    Sweep(SweepArgs),
    /// Write a planted-structure test data set as long-format CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Long-format CSV: station_id,latitude,longitude,altitude_m,timestamp,parameter,value
    #[arg(long)]
    pub input: PathBuf,
    /// Panel file to write (JSON).
    #[arg(long)]
    pub output: PathBuf,
    /// Exclusion report to write (CSV).
    #[arg(long)]
    pub exclusions: PathBuf,
    /// Parameters that receive height correction.
    #[arg(long, value_delimiter = ',', default_value = "temperature")]
    pub temperature_params: Vec<String>,
    /// Directory for the intermediate stages (interpolated, height-corrected).
    #[arg(long)]
    pub audit_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Awt,
    Birch,
}

/// Clustering flags shared by `cluster` and `sweep`.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Merge bound, in squared distance units of the z-scaled data.
    #[arg(long, default_value_t = 1.0)]
    pub threshold: f64,
    /// Wavelet levels used to build the CF tree.
    #[arg(long, default_value_t = 3)]
    pub tree_levels: usize,
    /// Finest wavelet levels discarded before clustering.
    #[arg(long, default_value_t = 0)]
    pub drop_levels: usize,
    #[arg(long, default_value_t = 8)]
    pub branching_factor: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Awt)]
    pub mode: ModeArg,
    /// Flag clusters of at most this size as outliers instead of using the
    /// automatic size-step cutoff.
    #[arg(long)]
    pub outlier_max_size: Option<usize>,
    /// K-Means iteration cap per resolution level.
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    /// Shuffle the insertion order with this seed. Without it stations are
    /// inserted in file order and nothing is random.
    #[arg(long)]
    pub seed_shuffle: Option<u64>,
}

impl ConfigArgs {
    pub fn config(&self) -> AwtConfig {
        AwtConfig {
            threshold: self.threshold,
            tree_levels: self.tree_levels,
            drop_levels: self.drop_levels,
            branching_factor: self.branching_factor,
            max_iters_per_level: self.max_iters,
            outlier_max_size: self.outlier_max_size,
            mode: match self.mode {
                ModeArg::Awt => Mode::Awt,
                ModeArg::Birch => Mode::Birch,
            },
        }
    }
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub panels: PathBuf,
    /// Receives result.json, sizes.csv, mean_series.csv and manifest.json.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Also write the CF tree as JSON.
    #[arg(long)]
    pub dump_tree: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Result file.
    pub first: PathBuf,
    /// Second result file to compare against.
    pub second: Option<PathBuf>,
    /// Panel file for a resolution study (with --drop-grid).
    #[arg(long, requires = "drop_grid")]
    pub panels: Option<PathBuf>,
    /// Drop counts to compare against the undropped run, e.g. 0,1,2,3.
    #[arg(
        long,
        value_delimiter = ',',
        requires = "panels",
        conflicts_with = "second"
    )]
    pub drop_grid: Option<Vec<usize>>,
    /// Study CSV to write; printed to stdout when absent.
    #[arg(long, requires = "drop_grid")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub panels: PathBuf,
    /// Ascending thresholds, e.g. 0.01,0.1,1,10.
    #[arg(long, value_delimiter = ',', required = true)]
    pub thresholds: Vec<f64>,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// CSV to write; printed to stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AWT_LOG", "warn")).init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let outcome = match &cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    eprintln!("awt: {e}");
    ExitCode::from(e.exit_code() as u8)
}
