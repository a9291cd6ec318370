use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

pub const THREADS_VAR: &str = "EMBED_INFOLAB_THREADS";

#[derive(Parser, Debug)]
#[command(name = "embed-infolab", version, about = "Information-theoretic analyses of LLM embeddings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Log-det entropy of a token representation matrix.
    Entropy(EntropyArgs),
    /// Entropy scaling sweeps of the skill-graph simulator.
    Scaling(ScalingArgs),
    /// Per-token information gain curve.
    Infogain(InfogainArgs),
    /// Lasso token selection, optionally against attention.
    Lasso(LassoArgs),
    /// Pairwise distances between sentence summaries.
    Distances(DistancesArgs),
    /// PCA of sentence summaries.
    Pca(PcaArgs),
    /// Runs the built-in invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct EntropyArgs {
    /// EMB1 matrix `[n, d]`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Keep rows as stored instead of scaling them to unit norm.
    #[arg(long)]
    pub raw: bool,
    /// JSON output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sweep {
    Skills,
    Parameters,
    Flops,
    Dataset,
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sweep::Skills => "skills",
            Sweep::Parameters => "parameters",
            Sweep::Flops => "flops",
            Sweep::Dataset => "dataset",
        })
    }
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct ScalingArgs {
    #[arg(long, value_enum)]
    pub sweep: Sweep,
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Number of skills (default 1e6, or 1e15 for the dataset sweep).
    #[arg(long = "M")]
    pub m: Option<u64>,
    #[arg(long = "B", default_value_t = 10.0)]
    pub b: f64,
    #[arg(long = "C", default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Parameters per skill.
    #[arg(long = "r", default_value_t = 1)]
    pub r: u64,
    #[arg(long = "A", default_value_t = 1.0)]
    pub a: f64,
    #[arg(long = "gamma-d", default_value_t = 0.3)]
    pub gamma_d: f64,
    /// Sweep start, in the sweep's own x units.
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct InfogainArgs {
    /// EMB1 matrix `[T, d]`.
    #[arg(long)]
    pub input: PathBuf,
    /// Observation noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    pub sigma: f64,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct LassoArgs {
    /// EMB1 matrix `[T+1, d]` of token representations.
    #[arg(long)]
    pub input: PathBuf,
    /// EMB1 attention `[H, T+1, T+1]` or `[L, H, T+1, T+1]`.
    #[arg(long)]
    pub attention: Option<PathBuf>,
    /// EMB1 value vectors `[T+1, d]`, enables the unrolling check.
    #[arg(long)]
    pub values: Option<PathBuf>,
    /// JSON token sidecar.
    #[arg(long)]
    pub tokens: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-4)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    pub threshold: f64,
    /// Layer of a 4-D attention tensor; negative counts from the end.
    #[arg(long, default_value_t = -1)]
    pub layer: i64,
    /// Token regressed on its predecessors (default: last).
    #[arg(long)]
    pub query: Option<usize>,
    #[arg(long)]
    pub no_normalize: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct DistancesArgs {
    /// Directory of EMB1 matrices, one sentence per file.
    #[arg(long)]
    pub input_dir: PathBuf,
    /// last, mean or cov.
    #[arg(long, default_value = "mean")]
    pub mode: String,
    /// l2, logdet, js, riemann, loge or frobenius (default: l2, or js for cov).
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 100.0)]
    pub gamma: f64,
    /// Center before forming covariances.
    #[arg(long)]
    pub center: bool,
    #[arg(long)]
    pub raw: bool,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct PcaArgs {
    #[arg(long)]
    pub input_dir: PathBuf,
    /// last or mean.
    #[arg(long, default_value = "mean")]
    pub mode: String,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[arg(long)]
    pub raw: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(allow_negative_numbers = true)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure reported as one line, naming the flag at fault when known.
#[derive(Debug)]
pub struct CliError {
    pub flag: Option<&'static str>,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = self.message.replace(['\n', '\r'], " ");
        match self.flag {
            Some(flag) => write!(f, "error: {flag}: {msg}"),
            None => write!(f, "error: {msg}"),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Flag<T> {
    fn flag(self, flag: &'static str) -> CliResult<T>;
}

impl<T, E: fmt::Display> Flag<T> for Result<T, E> {
    fn flag(self, flag: &'static str) -> CliResult<T> {
        self.map_err(|e| CliError {
            flag: Some(flag),
            message: e.to_string(),
        })
    }
}

pub fn bad(flag: &'static str, message: impl Into<String>) -> CliError {
    CliError {
        flag: Some(flag),
        message: message.into(),
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| bad(THREADS_VAR, format!("expected a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .flag(THREADS_VAR)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Entropy(a) => commands::entropy(a),
        Command::Scaling(a) => commands::scaling(a),
        Command::Infogain(a) => commands::infogain(a),
        Command::Lasso(a) => commands::lasso(a),
        Command::Distances(a) => commands::distances(a),
        Command::Pca(a) => commands::pca(a),
        Command::Selftest(a) => commands::selftest(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(1)
        }
    }
}
