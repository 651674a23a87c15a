use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

/// Exit code for malformed invocations.
pub const EXIT_USAGE: u8 = 64;
/// Exit code when some, but not all, inputs of a batch failed.
pub const EXIT_PARTIAL: u8 = 2;

#[derive(Parser, Debug)]
#[command(name = "spmvlab", version, about = "SpMV scalability laboratory")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Topology config file; built-in FT-2000+ when absent.
    #[arg(long, global = true, env = "SPMVLAB_TOPOLOGY")]
    pub topology: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Measure on this host or simulate the cache hierarchy.
    #[arg(long, global = true, value_enum, default_value_t = Mode::Simulate)]
    pub mode: Mode,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Measure,
    Simulate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatArg {
    Csr,
    Csr5,
}

impl From<FormatArg> for spmvlab::exec::Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csr => spmvlab::exec::Format::Csr,
            FormatArg::Csr5 => spmvlab::exec::Format::Csr5,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvertTarget {
    Csr,
    Csr5,
    Mtx,
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Matrix Market files.
    pub matrices: Vec<PathBuf>,
    /// Tab-separated manifest of `name<TAB>path[<TAB>group]` lines.
    #[arg(long, conflicts_with = "matrices")]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ExecArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csr)]
    pub format: FormatArg,
    /// `compact`, `scatter`, or `cores:0,4,8,12`.
    #[arg(long, default_value = "compact")]
    pub placement: String,
    /// `rows-static`, `nnz-balanced` or `csr5-tiles`; the format's default when absent.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long, default_value_t = spmvlab::matrix::DEFAULT_OMEGA)]
    pub omega: usize,
    #[arg(long, default_value_t = spmvlab::matrix::DEFAULT_SIGMA)]
    pub sigma: usize,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print a matrix's storage arrays, or rewrite it as Matrix Market.
    Convert {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ConvertTarget::Csr)]
        to: ConvertTarget,
        #[arg(long, default_value_t = spmvlab::matrix::DEFAULT_OMEGA)]
        omega: usize,
        #[arg(long, default_value_t = spmvlab::matrix::DEFAULT_SIGMA)]
        sigma: usize,
    },
    /// Run SpMV for every matrix and thread count; one JSON record per line.
    Bench {
        #[command(flatten)]
        inputs: Inputs,
        /// Comma-separated thread counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
        threads: Vec<usize>,
        #[command(flatten)]
        exec: ExecArgs,
        #[arg(long, default_value_t = 5)]
        min_reps: usize,
        #[arg(long, default_value_t = 1000)]
        max_reps: usize,
    },
    /// Simulate one matrix and print per-thread cache counters as JSON.
    Simulate {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        threads: usize,
        #[command(flatten)]
        exec: ExecArgs,
    },
    /// Build the feature CSV for a set of matrices.
    Features {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, default_value_t = 4)]
        threads: usize,
        #[command(flatten)]
        exec: ExecArgs,
        /// Counter CSV with `matrix,threads,thread_id,event,value` rows.
        #[arg(long)]
        counters: Option<PathBuf>,
        /// Which counters win when both sources cover a run.
        #[arg(long, value_parser = ["simulated", "imported"])]
        precedence: Option<String>,
    },
    /// Fit a forest on a feature CSV and write the model JSON.
    Train {
        features: PathBuf,
        #[arg(long, default_value_t = 0.9)]
        train_frac: f64,
        #[arg(long, default_value_t = 6)]
        max_depth: usize,
        #[arg(long, default_value_t = 5)]
        min_leaf: usize,
        #[arg(long, default_value_t = 50)]
        trees: usize,
        /// Train every tree on all rows instead of a bootstrap resample.
        #[arg(long)]
        no_bootstrap: bool,
        /// Where to write the held-out MAE and R².
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rank features of a trained model, or print one of its trees.
    Importance {
        model: PathBuf,
        #[arg(long)]
        tree: Option<usize>,
    },
    /// Recommend optimizations from a feature CSV or a simulated matrix.
    Advise {
        /// Feature CSV produced by `features`.
        features: Option<PathBuf>,
        /// Simulate this matrix, advise, and evaluate each recommendation.
        #[arg(long, conflicts_with = "features")]
        matrix: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        #[arg(long, default_value_t = 0.45)]
        job_var: f64,
        #[arg(long, default_value_t = 0.02)]
        l2_change: f64,
        #[arg(long, default_value_t = 8.0)]
        nnz_avg: f64,
        #[arg(long, default_value_t = 10.0)]
        nnz_var: f64,
    },
    /// Write a synthetic matrix in Matrix Market format.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Reorder rows for locality of x.
    Reorder {
        input: PathBuf,
        /// Column bucket width; a quarter of the L2 in doubles when absent.
        #[arg(long)]
        window: Option<usize>,
        /// Also write the permutation, one old row index per line.
        #[arg(long)]
        perm: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug, Clone)]
pub enum GenerateKind {
    /// The 4x4 example matrix.
    Example,
    /// Heavy rows clustered in one band.
    Clustered {
        #[arg(long, default_value_t = 4000)]
        rows: usize,
        #[arg(long, default_value_t = 100)]
        hot_rows: usize,
        #[arg(long, default_value_t = 1000)]
        nnz_hot: usize,
        #[arg(long, default_value_t = 1)]
        nnz_cold: usize,
    },
    /// Interleaved row groups with poor reuse of x.
    Locality {
        #[arg(long, default_value_t = 16)]
        groups: usize,
        #[arg(long, default_value_t = 256)]
        rows_per_group: usize,
        #[arg(long, default_value_t = 4096)]
        cols: usize,
        #[arg(long, default_value_t = 4)]
        nnz_per_row: usize,
    },
    /// Random entries inside a band around the diagonal.
    Banded {
        #[arg(long, default_value_t = 4096)]
        rows: usize,
        #[arg(long, default_value_t = 512)]
        half_band: usize,
        #[arg(long, default_value_t = 32)]
        nnz_per_row: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(code) => code,
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(commands::Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
