//! `saddle-transport`: compute equilibria, periodic orbits, tubes,
//! connections, graphs and shadowing orbits, writing CSV/JSON datasets
//! with a manifest each.
//!
//! Exit status: 0 on success, 2 on a usage error, 3 when a computation
//! fails (the error is printed to stderr as JSON).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod figure;
mod output;

use commands::Ctx;
use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(saddle_transport::Error),
    Io(std::io::Error),
}

impl From<saddle_transport::Error> for CliError {
    fn from(e: saddle_transport::Error) -> Self {
        CliError::Failed(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "saddle-transport", version, about = "Saddle-mediated transport in two-degree-of-freedom Hamiltonian systems")]
struct Cli {
    /// JSON run configuration (model parameters, tolerances, seed counts).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for the parallel seed maps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "TUBE_OUT")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibria with energies, classifications and eigenvalues.
    Equilibria(commands::SystemArgs),
    /// Symmetric periodic orbit around an index-1 saddle.
    Upo(commands::UpoArgs),
    /// Cut of a manifold tube with a Poincaré section.
    Tube(commands::TubeArgs),
    /// Homoclinic or heteroclinic connections between periodic orbits.
    Connections(commands::ConnectionsArgs),
    /// Connection graph over the periodic orbits at one energy.
    Graph(commands::GraphArgs),
    /// Orbit shadowing a walk on a connection graph.
    Shadow(commands::ShadowArgs),
    /// Hill's region on a configuration-space grid.
    Hills(commands::HillsArgs),
    /// Collinear Lagrange points L1 and L2.
    #[command(name = "pcr3bp-points")]
    Pcr3bpPoints(commands::PointsArgs),
    /// Datasets for one of the standard figures.
    Figure(figure::FigureArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let out_dir = cfg.resolve_out(cli.out.as_deref());
    let ctx = Ctx { cfg, out_dir };
    match &cli.command {
        Command::Equilibria(a) => commands::equilibria(&ctx, a),
        Command::Upo(a) => commands::upo(&ctx, a),
        Command::Tube(a) => commands::tube(&ctx, a),
        Command::Connections(a) => commands::connections(&ctx, a),
        Command::Graph(a) => commands::graph(&ctx, a),
        Command::Shadow(a) => commands::shadow(&ctx, a),
        Command::Hills(a) => commands::hills(&ctx, a),
        Command::Pcr3bpPoints(a) => commands::pcr3bp_points(&ctx, a),
        Command::Figure(a) => figure::figure(&ctx, a),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": kind, "message": message }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // help and version exit 0, everything else 2
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(2)
        }
        Err(CliError::Failed(e)) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
        Err(CliError::Io(e)) => {
            eprintln!("{}", error_json("Io", &e.to_string()));
            ExitCode::from(3)
        }
    }
}
