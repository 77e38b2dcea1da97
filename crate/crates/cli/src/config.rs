use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hankel_les::ensemble::EntryDistribution;
use serde::Serialize;

/// Version of every JSON artifact this binary writes.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "hankel-les",
    version,
    about = "Linear eigenvalue statistics of random Hankel matrices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate w_p = Tr((H/sqrt(n))^p) and report empirical moments.
    Simulate(SimulateArgs),
    /// Limiting moments beta_k of w_p from the pair-partition expansion.
    Limit(LimitArgs),
    /// Limiting covariance of w_{p1} and w_{p2}.
    Cov(CovArgs),
    /// Run the oracle suite and report one record per check.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Base seed of every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; the HANKEL_LES_WORKERS environment variable takes
    /// precedence.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Powers p (repeat the flag or give a comma-separated list).
    #[arg(long = "p", required = true, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
    pub p: Vec<u32>,
    /// Moment orders k.
    #[arg(long = "k", value_delimiter = ',', default_value = "1,2,3,4", value_parser = clap::value_parser!(u32).range(1..))]
    pub k: Vec<u32>,
    /// Matrix order.
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub n: u64,
    /// Number of simulated matrices.
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub reps: u64,
    /// Entry law: gaussian, rademacher or uniform_centered.
    #[arg(long, default_value = "gaussian")]
    pub dist: EntryDistribution,
    /// Number of equal-width histogram bins per p.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub hist: Option<u64>,
    /// Histogram CSV path; with several p the file name gains a `_p<p>` suffix.
    #[arg(long, requires = "hist")]
    pub hist_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Add the wall-clock runtime to the JSON record (breaks byte-identity).
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct IntegratorArgs {
    /// Monte Carlo samples per partition integral.
    #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples: u64,
    /// Opt-in number of sampled partitions beyond the enumeration cap.
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub partition_samples: Option<u64>,
    /// Include the per-partition terms.
    #[arg(long)]
    pub breakdown: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long)]
    pub timing: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    /// Odd degree p >= 3.
    #[arg(long = "p", value_parser = clap::value_parser!(u64).range(1..))]
    pub p: u64,
    /// Moment orders k.
    #[arg(long = "k", value_delimiter = ',', default_value = "2", value_parser = clap::value_parser!(u64).range(1..))]
    pub k: Vec<u64>,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Debug, Args)]
pub struct CovArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub p1: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub p2: u64,
    #[command(flatten)]
    pub integrator: IntegratorArgs,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Run only the named checks (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Print the JSON report instead of the text summary.
    #[arg(long)]
    pub json: bool,
    /// List the check names and exit.
    #[arg(long)]
    pub list: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// The configuration echo embedded in every JSON artifact. Fields a command
/// does not use are null.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub p: Vec<u64>,
    pub k: Vec<u64>,
    pub n: Option<u64>,
    pub reps: Option<u64>,
    pub samples: Option<u64>,
    pub partition_samples: Option<u64>,
    pub seed: u64,
    pub distribution: Option<String>,
    /// Effective worker count after the environment override.
    pub workers: Option<u64>,
    pub out: Option<String>,
    pub format: Option<Format>,
    pub hist: Option<u64>,
    pub hist_out: Option<String>,
    pub breakdown: Option<bool>,
    pub only: Vec<String>,
}

impl RunConfig {
    pub fn base(command: &str, common: &CommonArgs) -> Self {
        RunConfig {
            command: command.to_string(),
            seed: common.seed,
            workers: hankel_les::parallel::resolve_workers(common.workers.map(|w| w as usize))
                .map(|w| w as u64),
            out: common.out.as_ref().map(|p| p.display().to_string()),
            ..Default::default()
        }
    }

    pub fn worker_count(&self) -> Option<usize> {
        self.workers.map(|w| w as usize)
    }
}
