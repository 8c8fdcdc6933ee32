//! `ledger-flow` command line: batch runs over ledger files with CSV/JSON outputs.
//!
//! Exit codes: 0 success, 2 I/O or unreadable input, 3 analysis domain error,
//! 4 invalid configuration or usage.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use manifest::{InputDigest, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "LEDGER_FLOW_OUT_DIR";

/// Command failure, carrying the category that selects the exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("analysis error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => EXIT_IO,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Config(_) => EXIT_CONFIG,
        }
    }
}

impl From<ledger_flow::Error> for CliError {
    fn from(err: ledger_flow::Error) -> Self {
        use ledger_flow::Error as E;
        match err {
            E::Io(_) | E::Format(_) => CliError::Io(err.to_string()),
            E::Domain(_) | E::DegenerateTail(_) | E::MissingNode(_) => CliError::Domain(err.to_string()),
            E::Config(_) => CliError::Config(err.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Io(err.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(err: csv::Error) -> Self {
        ledger_flow::Error::from(err).into()
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "ledger-flow", version, about = "Ledger transaction analytics")]
pub struct Cli {
    /// Directory receiving all output files
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LedgerFormat {
    Csv,
    Jsonl,
}

impl From<LedgerFormat> for ledger_flow::ingest::InputFormat {
    fn from(f: LedgerFormat) -> Self {
        match f {
            LedgerFormat::Csv => ledger_flow::ingest::InputFormat::Csv,
            LedgerFormat::Jsonl => ledger_flow::ingest::InputFormat::JsonLines,
        }
    }
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Ledger file
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: LedgerFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Analysis {
    Ccdf,
    Pareto,
    Daily,
    Dft,
    Herding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DailyMetric {
    TxnCount,
    Users,
    Amount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphFormatArg {
    Dot,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, validate and filter raw ledgers into one canonical CSV
    Ingest {
        /// Ledger files, processed in order
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,

        #[arg(long, value_enum, default_value = "csv")]
        format: LedgerFormat,
    },
    /// Distribution and time-series analyses of a filtered ledger
    Analyze {
        #[command(flatten)]
        input: InputArgs,

        #[arg(long, value_enum)]
        which: Analysis,

        /// Tail threshold for Pareto fits, in XRP
        #[arg(long, default_value_t = 1e7)]
        xmin_xrp: f64,

        /// Restrict amounts to one UTC calendar year (ccdf, pareto)
        #[arg(long)]
        year: Option<i32>,

        /// Daily series fed to the DFT
        #[arg(long, value_enum, default_value = "txn-count")]
        series: DailyMetric,
    },
    /// Flow Index and node class for every account
    Flowindex {
        #[command(flatten)]
        input: InputArgs,

        #[arg(long, default_value_t = ledger_flow::concentration::DEFAULT_ORDER)]
        order_n: u32,

        #[arg(long, default_value_t = ledger_flow::flow::DEFAULT_CUTOFF)]
        cutoff: f64,
    },
    /// Threshold networks with walnut partition exports
    Network {
        #[command(flatten)]
        input: InputArgs,

        /// Big-node thresholds, in XRP
        #[arg(long, required = true, num_args = 1..)]
        threshold_xrp: Vec<f64>,

        /// Precomputed Flow Index table; computed from the input when absent
        #[arg(long)]
        flow_table: Option<PathBuf>,

        #[arg(long, default_value_t = ledger_flow::concentration::DEFAULT_ORDER)]
        order_n: u32,

        #[arg(long, default_value_t = ledger_flow::flow::DEFAULT_CUTOFF)]
        cutoff: f64,

        #[arg(long, value_enum, num_args = 1.., default_values = ["dot", "json"])]
        graph_format: Vec<GraphFormatArg>,
    },
    /// Generate a synthetic ledger
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// JSON configuration; flags given explicitly override it
    #[arg(long)]
    pub config: Option<PathBuf>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long)]
    pub n_days: Option<u32>,

    #[arg(long)]
    pub n_accounts: Option<u32>,

    #[arg(long)]
    pub txns_per_day: Option<f64>,

    #[arg(long)]
    pub pareto_alpha: Option<f64>,

    #[arg(long)]
    pub weekend_dip: Option<f64>,

    #[arg(long)]
    pub pairs: Option<u32>,

    #[arg(long)]
    pub bridges: Option<u32>,

    #[arg(long)]
    pub even_traders: Option<u32>,

    #[arg(long, value_enum, default_value = "csv")]
    pub output_format: LedgerFormat,
}

/// Parses arguments, runs the command, and returns the process exit code.
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
    match commands::execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("ledger-flow: {e}");
            e.exit_code()
        }
    }
}
