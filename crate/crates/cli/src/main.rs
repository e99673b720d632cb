//! `geoerr` command-line tool.

mod commands;
mod run;

use clap::{Parser, Subcommand};

use commands::Common;

#[derive(Debug, Parser)]
#[command(name = "geoerr", version, about = "Geolocation error propagation for satellite stereo")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit an affine camera to an RPC over a local tile.
    FitAffine(commands::FitAffineArgs),
    /// Intersect the rays of a scene and report the error ellipsoid.
    Intersect(commands::IntersectArgs),
    /// Scatter the intersection under random pose errors.
    Montecarlo(commands::MonteCarloArgs),
    /// Fuse stereo point clouds into a DSM with error layers.
    Fuse(commands::FuseArgs),
    /// Compare a fused DSM with ground truth using normalized distances.
    Evaluate(commands::EvaluateArgs),
    /// Classify disparity texture and map classes to disparity sigma.
    Tv(commands::TvArgs),
    /// Generate synthetic scenes, clouds and RPCs.
    Simulate(commands::SimulateArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            std::process::exit(2);
        }
    }
    let c = &cli.common;
    let result = match &cli.command {
        Command::FitAffine(a) => commands::fit_affine(c, a),
        Command::Intersect(a) => commands::intersect(c, a),
        Command::Montecarlo(a) => commands::montecarlo(c, a),
        Command::Fuse(a) => commands::fuse(c, a),
        Command::Evaluate(a) => commands::evaluate(c, a),
        Command::Tv(a) => commands::tv(c, a),
        Command::Simulate(a) => commands::simulate(c, a),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
