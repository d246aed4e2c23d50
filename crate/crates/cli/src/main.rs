//! `drainage`: experiments on streamflow in river networks driven by random storms.
//!
//! Interface units are hours, mm, km² and L/s; everything is SI inside.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "drainage", version, about = "Streamflow statistics on river networks under compound-Poisson rainfall")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Network file: one `edge <id> <parent|-> <area_km2> <K_per_hour> <H_per_hour>` per line.
    #[arg(long)]
    pub network: PathBuf,
    /// Rainfall file of `key=value` lines.
    #[arg(long)]
    pub rain: Option<PathBuf>,
    /// Override one rainfall key; repeatable, applied after the file.
    #[arg(long = "rain-set", value_name = "KEY=VALUE")]
    pub rain_set: Vec<String>,
    /// Seed for every random stream.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for CSV files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Check a network and rainfall configuration.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Simulate a discharge path and sample it on a regular time grid.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 240.0)]
        horizon_hours: f64,
        #[arg(long, default_value_t = 1.0)]
        step_hours: f64,
        /// Initial state: the invariant mean or zero.
        #[arg(long, default_value = "mean", value_parser = ["mean", "zero"])]
        start: String,
    },
    /// Invariant density of discharge on `(0, x_max_factor · E Q_e]`.
    Density {
        #[command(flatten)]
        common: Common,
        /// Comma-separated edge ids, or `all`; the root by default.
        #[arg(long)]
        edges: Option<String>,
        #[arg(long, default_value_t = 200)]
        points: usize,
        #[arg(long, default_value_t = 10.0)]
        x_max_factor: f64,
    },
    /// Invariant moments E Q_eⁿ and their coefficients.
    Moments {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: Option<String>,
        #[arg(long, default_value_t = 4)]
        n_max: usize,
    },
    /// Tail asymptotics of the invariant law.
    Tails {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: Option<String>,
    },
    /// Unit hydrograph of a uniform unit storm.
    Hydrograph {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: Option<String>,
        #[arg(long, default_value_t = 240.0)]
        t_max_hours: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Normalised densities under random rate multipliers.
    Heterogeneity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        edges: Option<String>,
        /// Range of the K multiplier, `lo,hi`.
        #[arg(long, default_value = "0.5,1.5")]
        eps_k: String,
        /// Range of the H multiplier, `lo,hi`.
        #[arg(long, default_value = "0.5,1.5")]
        eps_h: String,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Upper end of the normalised axis Q_e / E Q_e.
        #[arg(long, default_value_t = 3.0)]
        x_max: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { common } => commands::validate(&common),
        Command::Simulate { common, horizon_hours, step_hours, start } => {
            commands::simulate(&common, horizon_hours, step_hours, &start)
        }
        Command::Density { common, edges, points, x_max_factor } => {
            commands::density(&common, edges.as_deref(), points, x_max_factor)
        }
        Command::Moments { common, edges, n_max } => commands::moments(&common, edges.as_deref(), n_max),
        Command::Tails { common, edges } => commands::tails(&common, edges.as_deref()),
        Command::Hydrograph { common, edges, t_max_hours, points } => {
            commands::hydrograph(&common, edges.as_deref(), t_max_hours, points)
        }
        Command::Heterogeneity { common, edges, eps_k, eps_h, points, x_max } => {
            commands::heterogeneity(&common, edges.as_deref(), &eps_k, &eps_h, points, x_max)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
