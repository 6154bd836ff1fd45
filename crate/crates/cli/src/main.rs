use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use goram_core::partition::DEFAULT_THRESHOLD;

mod bench;
mod commands;
mod error;

use error::CliError;

const DEFAULT_SEED: &str = "goram";

/// Secure graph queries over a federated, secret-shared graph held by
/// three simulated servers.
#[derive(Parser, Debug)]
#[command(name = "goram", version)]
struct Cli {
    /// Master seed for all randomness; GORAM_SEED takes precedence.
    #[arg(long, global = true, default_value = DEFAULT_SEED)]
    seed: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Derive the chunk size k from the providers' secret edge counts.
    Configure {
        /// One edge list per provider.
        #[arg(required = true)]
        edge_files: Vec<PathBuf>,
        #[arg(long)]
        vertices: u64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold_b: u64,
        #[arg(long, default_value_t = 0)]
        attr_lanes: usize,
    },
    /// Partition one provider's edge list and write three share files.
    Prepare {
        edge_file: PathBuf,
        #[arg(long)]
        vertices: u64,
        #[arg(long)]
        chunk_size: u64,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold_b: u64,
        #[arg(long, default_value_t = 0)]
        attr_lanes: usize,
        /// Extra dummy edges per block.
        #[arg(long, default_value_t = 0)]
        pad_extra: usize,
        /// Output prefix; files are written to PREFIX.s1, PREFIX.s2, PREFIX.s3.
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate provider shares and write the engine state.
    Init {
        /// Share-file prefixes, one per provider (as given to `prepare --out`).
        #[arg(required = true)]
        providers: Vec<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
        threshold_b: u64,
        #[arg(long, default_value_t = 1)]
        slices: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one query against a saved engine.
    Query {
        #[command(subcommand)]
        kind: QueryKind,
        #[arg(long, global = true, default_value = "goram.state")]
        state: PathBuf,
    },
    /// Generate a graph, run every query kind and report cost as JSON.
    Bench(BenchArgs),
}

#[derive(Subcommand, Debug)]
enum QueryKind {
    EdgeExist { src: u64, dst: u64 },
    NeighborsCount { v: u64 },
    NeighborsGet { v: u64 },
    UniqueNeighborsCount { v: u64 },
    /// Directed cycle through the vertices in order, in either direction.
    Cycle {
        #[arg(required = true, num_args = 2..)]
        vertices: Vec<u64>,
    },
    /// Edges out of `v` whose attribute `lane` is strictly below `threshold`.
    RangeCount {
        v: u64,
        threshold: u64,
        #[arg(long, default_value_t = 0)]
        lane: usize,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    Uniform,
    PowerLaw,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 1024)]
    vertices: u64,
    #[arg(long, default_value_t = 32768)]
    edges: usize,
    #[arg(long, default_value_t = 3)]
    providers: usize,
    #[arg(long, value_enum, default_value_t = Generator::Uniform)]
    generator: Generator,
    #[arg(long, default_value_t = 256)]
    threshold_b: u64,
    /// Fixed chunk size; derived securely from the edge counts when absent.
    #[arg(long)]
    chunk_size: Option<u64>,
    #[arg(long, default_value_t = 1)]
    slices: usize,
    #[arg(long, default_value_t = 0)]
    pad_extra: usize,
    #[arg(long, default_value_t = 1)]
    attr_lanes: usize,
    /// Queries per kind; one full ORAM epoch when absent.
    #[arg(long)]
    reps: Option<usize>,
    /// Leave wall-clock fields null so reports are byte-reproducible.
    #[arg(long)]
    omit_timing: bool,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = std::env::var("GORAM_SEED").unwrap_or(cli.seed);
    let seed = seed.as_bytes();
    match cli.command {
        Command::Configure {
            edge_files,
            vertices,
            threshold_b,
            attr_lanes,
        } => commands::configure(seed, &edge_files, vertices, threshold_b, attr_lanes),
        Command::Prepare {
            edge_file,
            vertices,
            chunk_size,
            threshold_b,
            attr_lanes,
            pad_extra,
            out,
        } => commands::prepare(seed, &edge_file, vertices, chunk_size, threshold_b, attr_lanes, pad_extra, &out),
        Command::Init {
            providers,
            threshold_b,
            slices,
            out,
        } => commands::init(seed, &providers, threshold_b, slices, &out),
        Command::Query { kind, state } => commands::query(&state, to_query(kind)),
        Command::Bench(args) => bench::run(seed, &args),
    }
}

fn to_query(kind: QueryKind) -> goram_core::Query {
    use goram_core::Query;
    match kind {
        QueryKind::EdgeExist { src, dst } => Query::EdgeExist { src, dst },
        QueryKind::NeighborsCount { v } => Query::NeighborsCount { v },
        QueryKind::NeighborsGet { v } => Query::NeighborsGet { v },
        QueryKind::UniqueNeighborsCount { v } => Query::UniqueNeighborsCount { v },
        QueryKind::Cycle { vertices } => Query::Cycle { vertices },
        QueryKind::RangeCount { v, threshold, lane } => Query::RangeCount { v, threshold, lane },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
