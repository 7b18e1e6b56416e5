//! `gwlimits`: classification, tilting, sampling, projections, walk
//! diagnostics and probe sweeps from the command line.
//!
//! Output goes to stdout as JSON (or CSV for `probe`). Failures are a JSON
//! object on stderr and exit status 2 for domain errors (a tilt outside its
//! domain, an off-lattice `n`, ...) or 1 for anything else.

mod commands;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gwlimits_core::Error as CoreError;

/// Worker threads for the parallel parts; unset means one per core.
const THREADS_VAR: &str = "GWLIMITS_NUM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "gwlimits", version, about = "Local limits of Galton-Watson trees conditioned on L_A")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generic / non-generic verdict and the critical tilt.
    Classify {
        law: PathBuf,
        #[arg(long)]
        set: String,
    },
    /// The tilted law p_{A,θ}, as a law file.
    Tilt {
        law: PathBuf,
        #[arg(long)]
        set: String,
        /// "a/b", an integer or a decimal.
        #[arg(long)]
        theta: String,
    },
    /// The law whose limit tree is the local limit given L_A = n.
    Pstar {
        law: PathBuf,
        #[arg(long)]
        set: String,
    },
    Sample(SampleArgs),
    /// t ↦ t^A (0 ∈ A) or t ↦ F_A(t) (0 ∉ A).
    Project {
        #[arg(value_enum)]
        kind: ProjectKind,
        #[arg(long)]
        tree: String,
        #[arg(long)]
        set: String,
    },
    /// P_k(|τ| = n) = (k/n) P(S_n = n − k).
    Dwass {
        law: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        n: usize,
    },
    /// P(S_{n−m} = n − k) / P(S_n = n) for the walk with increments p.
    Srlp {
        law: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        m: i64,
        #[arg(long, allow_hyphen_values = true)]
        k: i64,
    },
    /// δ_n(k, ℓ) of order 0 or 1 and its limit; with --set, the A-variant.
    Delta {
        law: PathBuf,
        #[arg(long, default_value_t = 0)]
        order: u8,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
        #[arg(long)]
        set: Option<String>,
    },
    /// B_{n,ℓ} (0 ∉ A) and its limit.
    Bnl {
        law: PathBuf,
        #[arg(long)]
        set: String,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        ell: i64,
    },
    Probe(ProbeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProjectKind {
    #[value(name = "tA")]
    TA,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SampleKind {
    /// Unconditioned GW tree.
    Gw,
    /// Window of the Kesten tree.
    Kesten,
    /// Window of the condensation tree.
    Condense,
    /// GW tree given L_A = n (or ≥ n with --at-least), by rejection.
    Conditioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Paren,
}

/// Sampled trees.
#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(value_enum)]
    kind: SampleKind,
    law: PathBuf,
    #[arg(long)]
    set: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    at_least: bool,
    #[arg(long, default_value_t = 3)]
    window: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    max_attempts: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Exact conditional T_+ probabilities against their limits over an n grid.
#[derive(Debug, Args)]
struct ProbeArgs {
    law: PathBuf,
    #[arg(long)]
    set: String,
    /// One `tree|x|k` per line; blank lines and `#` comments are skipped.
    #[arg(long)]
    events: PathBuf,
    /// Comma-separated, e.g. 5,9,17,33.
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<usize>,
    /// CSV destination; the manifest then goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the JSON manifest instead.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Why a command failed, and hence the exit status.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Core(CoreError),
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Core(e) if e.is_domain() => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Usage(m) => serde_json::json!({"error": "usage", "message": m}),
            Failure::Core(e) => serde_json::json!({"error": e.kind(), "message": e.to_string()}),
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("{THREADS_VAR}={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            return fail(&Failure::Usage(e.to_string().trim_end().to_owned()));
        }
    };
    let result = configure_threads().and_then(|()| commands::run(cli.command));
    match result {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            if !out.ends_with('\n') {
                let _ = stdout.write_all(b"\n");
            }
            ExitCode::SUCCESS
        }
        Err(f) => fail(&f),
    }
}

fn fail(f: &Failure) -> ExitCode {
    eprintln!("{}", f.to_json());
    ExitCode::from(f.exit_code())
}
