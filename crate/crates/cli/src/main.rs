//! `subpower`: sample-size and power planning for cluster analyses.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use subgroup_power::cluster::Method;
use subgroup_power::power::DEFAULT_N_GRID;
use subgroup_power::reduce::Reducer;

#[derive(Parser, Debug)]
#[command(
    name = "subpower",
    version,
    about = "Power and sample-size planning for subgroup discovery"
)]
pub struct Cli {
    /// INI file with defaults; see the README for its layout.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Threads used for replicates [default: all cores].
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    EffectCurves,
    CentroidShift,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_reducer(s: &str) -> Result<Reducer, String> {
    Reducer::parse(s).ok_or_else(|| format!("unknown reducer {s:?} (none, pca, mds, cmds)"))
}

/// Seed and replicate options shared by the simulation commands.
#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Replicates per cell.
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    /// Master seed; a random one is chosen and echoed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Expected centroid distance for p features at rate lambda.
    Delta {
        #[arg(long)]
        features: usize,
        #[arg(long)]
        lambda: f64,
    },
    /// Features needed to reach an expected centroid distance.
    Features {
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        lambda: f64,
        /// Round up instead of to the nearest integer.
        #[arg(long)]
        ceil: bool,
    },
    /// Estimate power for one cell.
    Power {
        /// kmeans, ward, cmeans, lca, lpa or gmm.
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Observations per subgroup.
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, required_unless_present = "null")]
        lambda: Option<f64>,
        /// Simulate a single population (no subgroup difference).
        #[arg(long, conflicts_with = "lambda")]
        null: bool,
        /// Reduction before clustering [default: pca, none for lca].
        #[arg(long, value_parser = parse_reducer)]
        reducer: Option<Reducer>,
        /// Feature correlation strength in [0, 1); 0 means independent.
        #[arg(long, default_value_t = 0.0)]
        correlation: f64,
        /// Fill the runtime_s column (makes output run-dependent).
        #[arg(long)]
        record_runtime: bool,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Smallest per-group n on a grid that reaches the target power.
    Search {
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        lambda: f64,
        /// Target power.
        #[arg(long, default_value_t = 0.9)]
        power: f64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_N_GRID)]
        grid: Vec<usize>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Reference table of feature counts and sample sizes.
    Table {
        #[arg(long, value_delimiter = ',', value_parser = parse_method,
              default_value = "kmeans,ward,cmeans,lca,lpa,gmm")]
        methods: Vec<Method>,
        #[arg(long, value_delimiter = ',', default_value = "0.75,1.5,3")]
        lambdas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 0.9)]
        power: f64,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_N_GRID)]
        grid: Vec<usize>,
        /// Maximum replicates to simulate; rows beyond it are marked skipped.
        #[arg(long)]
        budget: Option<usize>,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Plot-ready data.
    Figure {
        #[arg(long, value_enum)]
        which: Figure,
        #[arg(long, value_delimiter = ',', default_value = "0.75,1.5,3,6,12")]
        lambdas: Vec<f64>,
        /// effect-curves: points on the log-spaced p axis.
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// effect-curves: largest p.
        #[arg(long, default_value_t = 10_000)]
        max_features: usize,
        /// centroid-shift: feature counts.
        #[arg(long, value_delimiter = ',', default_value = "100")]
        features: Vec<usize>,
        /// centroid-shift: correlation strengths (0 = independent).
        #[arg(long, value_delimiter = ',', default_value = "0,0.5")]
        strengths: Vec<f64>,
        /// centroid-shift: reductions to compare.
        #[arg(long, value_delimiter = ',', value_parser = parse_reducer, default_value = "none,pca,mds")]
        reducers: Vec<Reducer>,
        /// centroid-shift: observations per subgroup.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// centroid-shift: replicates per condition.
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Check whether the available features give enough separation.
    Sensitivity {
        #[arg(long)]
        features: usize,
        #[arg(long)]
        lambda: f64,
    },
    /// Write a simulated two-group dataset as CSV.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, required_unless_present = "null")]
        lambda: Option<f64>,
        #[arg(long, conflicts_with = "lambda")]
        null: bool,
        /// Binary features instead of continuous.
        #[arg(long)]
        binary: bool,
        #[arg(long, default_value_t = 0.0)]
        correlation: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run one method on a dataset CSV and report the decision.
    Analyze {
        #[arg(long, value_name = "FILE")]
        data: PathBuf,
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long, value_parser = parse_reducer)]
        reducer: Option<Reducer>,
        /// Also score these cluster counts by silhouette, e.g. 2,3,4.
        #[arg(long, value_delimiter = ',')]
        choose_k: Vec<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use subgroup_power::Error;
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
            _ => 2,
        };
    }
    if err.downcast_ref::<commands::UsageError>().is_some() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::default().default_filter_or("warn,subgroup_power=info"),
    )
    .init();
    let args = match config::expand_args(&Cli::command(), std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            if code == 2 {
                eprintln!("run `subpower --help` for usage");
            }
            ExitCode::from(code)
        }
    }
}
