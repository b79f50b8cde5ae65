//! Command-line front end for the ramped XY chain: sweeps, fits and oracle
//! cross-checks, written as CSV and JSON.

pub mod config;
pub mod output;
pub mod run;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Command, ConfigError, RunConfig};
pub use run::{run, RunError};

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "XYQUENCH_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "xyquench", version, about = "Quench sweeps, QFI and skew information for the ramped XY chain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Subcommand)]
pub enum Sub {
    /// Measures along one ramp at every grid field
    FieldSweep,
    /// Endpoint measures against ramp time
    TauSweep,
    /// Tau sweeps per noise strength, peaks, decay fits and the tau_m exponent
    Scaling {
        /// Fit synthetic curves with tau_m = (xi^2)^(-2/3) instead of running the chain
        #[arg(long)]
        synthetic: bool,
    },
    /// Cross-check the pipeline against exact small-chain evolution
    Validate,
    /// Ground-state reference curves
    Static,
}

/// Overrides for config-file keys; values are parsed with the file's rules.
#[derive(Debug, Default, Args)]
pub struct Flags {
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<String>,
    #[arg(long = "N", global = true)]
    pub n: Option<String>,
    #[arg(long, global = true)]
    pub gamma: Option<String>,
    #[arg(long = "h-i", global = true, allow_hyphen_values = true)]
    pub h_i: Option<String>,
    #[arg(long = "h-f", global = true, allow_hyphen_values = true)]
    pub h_f: Option<String>,
    /// Comma list, or lo:hi:count for a log grid
    #[arg(long, global = true)]
    pub tau: Option<String>,
    #[arg(long, global = true)]
    pub xi: Option<String>,
    #[arg(long, global = true)]
    pub r: Option<String>,
    /// Any of qfi,lqc_x,lqc_y,lqc_z
    #[arg(long, global = true)]
    pub measures: Option<String>,
    /// min:max:count
    #[arg(long = "h-grid", global = true, allow_hyphen_values = true)]
    pub h_grid: Option<String>,
    #[arg(long = "rel-tol", global = true)]
    pub rel_tol: Option<String>,
    #[arg(long = "abs-tol", global = true)]
    pub abs_tol: Option<String>,
    #[arg(long = "N-oracle", global = true)]
    pub n_oracle: Option<String>,
    #[arg(long, global = true)]
    pub trajectories: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// lo:hi
    #[arg(long = "fit-window", global = true)]
    pub fit_window: Option<String>,
    /// two_point or exact
    #[arg(long, global = true)]
    pub averaging: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("out", &self.out),
            ("N", &self.n),
            ("gamma", &self.gamma),
            ("h_i", &self.h_i),
            ("h_f", &self.h_f),
            ("tau", &self.tau),
            ("xi", &self.xi),
            ("r", &self.r),
            ("measures", &self.measures),
            ("h_grid", &self.h_grid),
            ("rel_tol", &self.rel_tol),
            ("abs_tol", &self.abs_tol),
            ("N_oracle", &self.n_oracle),
            ("trajectories", &self.trajectories),
            ("seed", &self.seed),
            ("fit_window", &self.fit_window),
            ("averaging", &self.averaging),
        ];
        fields.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }
}

/// Config file first, then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut pairs = match &cli.flags.config {
        Some(p) => config::read_pairs(p)?,
        None => vec![],
    };
    let command = match cli.command {
        Sub::FieldSweep => Command::FieldSweep,
        Sub::TauSweep => Command::TauSweep,
        Sub::Scaling { synthetic } => {
            if synthetic {
                pairs.push(("synthetic".into(), "true".into()));
            }
            Command::Scaling
        }
        Sub::Validate => Command::Validate,
        Sub::Static => Command::Static,
    };
    pairs.extend(cli.flags.pairs());
    RunConfig::build(command, &pairs)
}

/// Sizes the global worker pool from the environment.
pub fn init_workers() -> Result<(), ConfigError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| ConfigError(format!("{WORKERS_ENV}: expected a positive integer, got '{v}'")))?;
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| ConfigError(format!("{WORKERS_ENV}: {e}")))
        }
        Err(_) => Ok(()),
    }
}
