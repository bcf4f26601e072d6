// l96: generate -> fit -> simulate -> diagnose -> compare.
//
// Exit codes: 0 ok, 1 assertion failed, 2 usage or invalid config,
// 3 divergence, 4 estimation or data error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use l96_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "l96",
    version,
    about = "Two-layer Lorenz '96 parameterization pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the full two-layer model and write the sampled (x, b) series.
    Generate(GenerateArgs),
    /// Fit a surrogate for b to a series and write the model JSON.
    Fit(FitArgs),
    /// Integrate the reduced model driven by a fitted surrogate.
    Simulate(SimulateArgs),
    /// Compute long-term statistics of a series or trajectory.
    Diagnose(DiagnoseArgs),
    /// Distances between two diagnostics reports, optionally as a pass/fail gate.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Built-in configuration: unimodal or trimodal.
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one field, e.g. `--set F=12`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Divide the base sample count by S.
    #[arg(long, default_value_t = 1)]
    pub scale: usize,
    /// Also export the series as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CovArg {
    Diag,
    Dense,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub series: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Largest lag of the PACF/ACF stored in the fit summary.
    #[arg(long, default_value_t = 40)]
    pub pacf_lag: usize,
    #[command(subcommand)]
    pub model: ModelArg,
}

#[derive(Debug, Subcommand)]
pub enum ModelArg {
    /// Offset plus white noise.
    Wn {
        #[arg(long, value_enum, default_value_t = CovArg::Diag)]
        cov: CovArg,
    },
    /// Independent AR(1) at each grid point.
    Ar1 {
        #[arg(long, value_enum, default_value_t = CovArg::Diag)]
        cov: CovArg,
    },
    /// White noise with a drift linear in x.
    Wnd {
        #[arg(long, value_enum, default_value_t = CovArg::Diag)]
        cov: CovArg,
    },
    /// b = 0.
    Unresolved,
    /// Lag-p endogenous term plus drift in x.
    Varx {
        #[arg(long)]
        p: usize,
        #[arg(long, value_enum, default_value_t = CovArg::Diag)]
        cov: CovArg,
        /// Regress on every lag 1..p instead of lag p alone.
        #[arg(long)]
        all_lags: bool,
    },
    /// Per-grid-point NARMAX surrogate.
    Narmax {
        #[arg(long, value_parser = ["1201", "1110"])]
        variant: String,
        /// Use the preset coefficients instead of fitting.
        #[arg(long)]
        preset_params: bool,
    },
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Series supplying the warm-start rows.
    #[arg(long, required_unless_present = "zero_history")]
    pub reference: Option<PathBuf>,
    /// Start from an all-zero history instead of reference data.
    #[arg(long)]
    pub zero_history: bool,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Defaults to the configuration's sample count.
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Run M trajectories with seeds seed..seed+M in parallel.
    #[arg(long)]
    pub ensemble: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = l96_core::diagnostics::DEFAULT_MAX_LAG)]
    pub max_lag: usize,
    #[arg(long, default_value_t = l96_core::diagnostics::DEFAULT_BINS)]
    pub bins: usize,
    /// Reuse the histogram range and bin count of an existing report.
    #[arg(long)]
    pub range_from: Option<PathBuf>,
    /// Include the PACF of b up to this lag.
    #[arg(long)]
    pub pacf: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    /// Thresholds file; turns the comparison into a gate.
    #[arg(long = "assert")]
    pub thresholds: Option<PathBuf>,
    #[arg(long)]
    pub acf_max_lag: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub enum Outcome {
    Ok,
    AssertionFailed,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::Comparison(_) => 2,
        Error::Divergence { .. } => 3,
        _ => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Simulate(a) => commands::simulate(&a),
        Command::Diagnose(a) => commands::diagnose(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::AssertionFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
