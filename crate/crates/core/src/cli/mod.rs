//! The `desmooth` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data or I/O error,
//! 4 numerical failure. Messages go to standard error.

mod commands;
mod demo;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, ErrorClass, Result};

pub use demo::{demo_sparse, DemoOptions, DemoReport};
pub use io::{parse_csv, parse_csv_str};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Environment variable capping worker threads (0 or unset: automatic).
pub const THREADS_ENV: &str = "DESMOOTH_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "desmooth",
    version,
    about = "Kernel smoothing guided by differential equations"
)]
#[command(disable_help_flag = true)]
struct Cli {
    #[arg(long, action = clap::ArgAction::Help, global = true, help = "Print help")]
    help: Option<bool>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one estimator to an `x,y` CSV file.
    Fit(FitArgs),
    /// Leave-one-out CV scores over a bandwidth grid.
    Bandwidth(BandwidthArgs),
    /// Run a Monte-Carlo MAD study from a JSON config.
    Simulate(SimulateArgs),
    /// Pointwise log-MSE curves from a JSON config.
    MseCurve(MseCurveArgs),
    /// Sparse-gap comparison on data simulated from the mouse tumor fit.
    DemoSparse(DemoArgs),
    /// DE1-1 to Nadaraya–Watson variance ratios on a random uniform design.
    VarianceRatio(RatioArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub(crate) enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub(crate) struct ModelArgs {
    /// Estimator: nw, ll, lq, lc, lp<d>, de1-<k>, de1lin-<k>, de1gen-<d>,
    /// nls, nls-known, loglinear, or `lp`/`de1`/`de1lin`/`de1gen` with --degree.
    #[arg(long)]
    pub method: String,
    #[arg(long)]
    pub degree: Option<usize>,
    /// Known rate λ of the model g' = λg.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Take λ from a log-linear prefit (NLS when some y ≤ 0).
    #[arg(long, conflicts_with = "lambda")]
    pub estimate_lambda: bool,
    #[arg(long, default_value = "gaussian")]
    pub kernel: String,
}

#[derive(Debug, Args)]
pub(crate) struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Bandwidth; defaults to half the median spacing of the design.
    #[arg(short = 'h', long)]
    pub bandwidth: Option<f64>,
    /// Evaluation grid `lo:hi:count`, equispaced.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub(crate) struct BandwidthArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Candidate bandwidths `lo:hi:count`, log-spaced.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub(crate) struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving `<config stem>.csv` and `<config stem>.json`.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub(crate) struct MseCurveArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Evaluation grid `lo:hi:count`; defaults to 101 points on the design interval.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub(crate) struct DemoArgs {
    #[arg(long, default_value_t = DemoOptions::default().seed)]
    pub seed: u64,
    #[arg(long, default_value = "demo-sparse")]
    pub output: PathBuf,
    /// Width of the removed block as a fraction of the time range.
    #[arg(long, default_value_t = DemoOptions::default().gap_fraction)]
    pub gap_fraction: f64,
    /// Centre of the removed block as a fraction of the time range.
    #[arg(long, default_value_t = DemoOptions::default().gap_center)]
    pub gap_center: f64,
    #[arg(short = 'h', long, default_value_t = DemoOptions::default().bandwidth)]
    pub bandwidth: f64,
}

#[derive(Debug, Args)]
pub(crate) struct RatioArgs {
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Bandwidth; defaults to half the median spacing of the drawn design.
    #[arg(short = 'h', long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

pub fn exit_code(error: &Error) -> i32 {
    match error.class() {
        ErrorClass::Config => EXIT_CONFIG,
        ErrorClass::Data => EXIT_DATA,
        ErrorClass::Numerical => EXIT_NUMERICAL,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match configure_threads().and_then(|()| dispatch(cli.command)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().map_err(|_| {
        Error::Config(format!(
            "{THREADS_ENV} must be a non-negative integer, got `{raw}`"
        ))
    })?;
    // a pool built earlier in the same process is kept
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Fit(args) => commands::fit(&args),
        Command::Bandwidth(args) => commands::bandwidth(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::MseCurve(args) => commands::mse_curve(&args),
        Command::DemoSparse(args) => {
            let report = demo_sparse(
                &DemoOptions {
                    seed: args.seed,
                    gap_fraction: args.gap_fraction,
                    gap_center: args.gap_center,
                    bandwidth: args.bandwidth,
                },
                &args.output,
            )?;
            print!("{}", report.summary());
            Ok(())
        }
        Command::VarianceRatio(args) => commands::variance_ratio(&args),
    }
}

/// `lo:hi:count`.
pub(crate) fn parse_grid_spec(spec: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::Config(format!("grid `{spec}` is not of the form lo:hi:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, count] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let count: usize = count.trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) || count == 0 {
        return Err(bad());
    }
    Ok((lo, hi, count))
}
