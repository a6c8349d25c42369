mod commands;
mod corpus;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lockbreak::netlist::DEFAULT_KEY_PREFIX;

/// Lock combinational bench netlists and recover their keys.
#[derive(Parser, Debug)]
#[command(name = "lockbreak", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Lock a bench netlist and write the locked bench plus a JSON manifest.
    Lock(LockArgs),
    /// Run the key-recovery attack and print a JSON report.
    Attack(AttackArgs),
    /// Check a key against the original netlist or an oracle.
    Verify(VerifyArgs),
    /// Generate a directory of locked bundles with a manifest.
    Corpus(CorpusArgs),
    /// Attack every bundle of a corpus and summarize per scheme.
    Report(ReportArgs),
    /// Solve a DIMACS or QDIMACS file.
    Solve(SolveArgs),
    /// Answer oracle queries for a bench netlist on stdin/stdout.
    OracleServe(ServeArgs),
}

#[derive(Args, Debug)]
struct Common {
    /// Name prefix that marks key inputs.
    #[arg(long, default_value = DEFAULT_KEY_PREFIX)]
    key_prefix: String,
}

#[derive(Args, Debug)]
struct LockArgs {
    /// Original bench file.
    input: PathBuf,
    #[arg(long)]
    scheme: Option<String>,
    /// Secret key as k_n..k_1.
    #[arg(long)]
    key: Option<String>,
    /// Key width when the key is drawn from the seed.
    #[arg(long)]
    key_bits: Option<usize>,
    /// Comma-separated protected inputs; chosen from the seed otherwise.
    #[arg(long, value_delimiter = ',')]
    protected: Vec<String>,
    /// Comma-separated 0-based key index per protected input (and block).
    #[arg(long, value_delimiter = ',')]
    pairing: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip structural randomization of the locked netlist.
    #[arg(long)]
    no_randomize: bool,
    /// Locked bench path; the manifest goes next to it as `.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args, Debug)]
struct AttackArgs {
    /// Locked bench file.
    input: PathBuf,
    #[arg(long, default_value = "ol")]
    mode: String,
    /// Oracle source: a bench path, `bench:PATH`, or `cmd:COMMAND`.
    #[arg(long)]
    oracle: Option<String>,
    /// QBF budget in seconds; 0 disables the limit.
    #[arg(long, default_value_t = 60.0)]
    qbf_timeout: f64,
    /// SAT budget in seconds for candidate generation.
    #[arg(long)]
    sat_timeout: Option<f64>,
    /// Value of unprotected inputs during oracle queries.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pi_fill: u8,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Locked bench file.
    input: PathBuf,
    /// Key as k_n..k_1.
    #[arg(long)]
    key: String,
    /// Original bench file.
    #[arg(long, conflicts_with = "oracle")]
    original: Option<PathBuf>,
    /// Oracle source: a bench path, `bench:PATH`, or `cmd:COMMAND`.
    #[arg(long)]
    oracle: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct CorpusArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated schemes.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "sarlock,antisat,caslock,gen-antisat,ttlock,cac"
    )]
    schemes: Vec<String>,
    /// Comma-separated circuits: majority, c17, c432s, c880s, c1355s, s24.
    #[arg(long, value_delimiter = ',', default_value = "s24")]
    circuits: Vec<String>,
    /// Comma-separated key widths.
    #[arg(long, value_delimiter = ',', default_value = "16")]
    key_bits: Vec<usize>,
    /// Seeds per (circuit, scheme, width).
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Corpus directory holding `manifest.json`.
    corpus: PathBuf,
    #[arg(long, default_value = "ol")]
    mode: String,
    #[arg(long, default_value_t = 60.0)]
    qbf_timeout: f64,
    #[arg(long)]
    sat_timeout: Option<f64>,
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pi_fill: u8,
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for per-bundle JSON reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// `.cnf` or `.qdimacs` file.
    input: PathBuf,
    /// Budget in seconds.
    #[arg(long)]
    timeout: Option<f64>,
    /// External solver command with a `{file}` placeholder.
    #[arg(long)]
    external: Option<String>,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Original bench file.
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

/// Failure classes, mapped to exit codes 1, 2 and 3.
#[derive(Debug)]
enum Failure {
    Usage(String),
    Negative(String),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let res = match cli.command {
        Command::Lock(a) => commands::lock(a),
        Command::Attack(a) => commands::attack(a),
        Command::Verify(a) => commands::verify(a),
        Command::Corpus(a) => corpus::corpus(a),
        Command::Report(a) => corpus::report(a),
        Command::Solve(a) => commands::solve(a),
        Command::OracleServe(a) => commands::serve(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Negative(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(3)
        }
    }
}
