//! `ahb`: run solvers, compare methods, certify growth/KL conditions and fit
//! convergence rates from traces.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 numerical
//! failure, 3 certification found violations.

// `!(x > 0.0)` style guards deliberately reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl From<ahb_core::Error> for Failure {
    fn from(e: ahb_core::Error) -> Self {
        match e {
            ahb_core::Error::NumericalFailure { .. } | ahb_core::Error::InnerSolve { .. } => {
                Failure::Numerical(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "ahb", version, about = "Adaptive heavy ball experiments and certification")]
pub struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for problem generation and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one solver and write trace.csv, its meta sidecar and summary.json.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Solver to run.
        #[arg(long)]
        method: Option<String>,
    },
    /// Run several solvers on one problem and write one trace per run plus compare.json.
    Compare {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated subset of the default methods.
        #[arg(long, value_delimiter = ',')]
        methods: Vec<String>,
    },
    /// Check growth/KL inequalities and print the report as JSON.
    #[command(subcommand)]
    Certify(CertifyCommand),
    /// Fit a linear or power convergence rate to the dist column of a trace.
    FitRate {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// First iteration of the fitting window.
        #[arg(long)]
        k_min: Option<usize>,
        /// Last iteration of the fitting window.
        #[arg(long)]
        k_max: Option<usize>,
    },
}

#[derive(Args, Debug, Default, Clone)]
pub struct ProblemArgs {
    /// quadratic, least_squares, power, abs_value or radon.
    #[arg(long)]
    pub problem: Option<String>,
    /// Problem parameters as a JSON object.
    #[arg(long)]
    pub params: Option<String>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct RunArgs {
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Momentum cap; `inf` for none.
    #[arg(long)]
    pub beta_cap: Option<f64>,
    #[arg(long)]
    pub gd_mu: Option<f64>,
    #[arg(long)]
    pub nesterov_nu: Option<f64>,
    #[arg(long)]
    pub alrhb_beta: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Start point: zeros or seeded-random.
    #[arg(long, value_enum)]
    pub x0: Option<StartArg>,
    #[arg(long)]
    pub x0_seed: Option<u64>,
    #[arg(long)]
    pub x0_norm: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum StartArg {
    Zeros,
    SeededRandom,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq)]
pub enum ModelArg {
    Linear,
    Power,
}

#[derive(Args, Debug, Clone)]
pub struct PhiArgs {
    /// Constant c of φ(t) = c·t^α.
    #[arg(long)]
    pub phi_c: f64,
    /// Exponent α of φ(t) = c·t^α.
    #[arg(long)]
    pub phi_alpha: f64,
}

#[derive(Args, Debug, Clone)]
pub struct SliceArgs {
    /// Reference point x̄ (defaults to the minimiser, else the origin).
    #[arg(long)]
    pub xbar: Option<String>,
    /// Ball radius around x̄.
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    /// Upper bound on f(x) − f(x̄); omit for none.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Subcommand, Debug)]
pub enum CertifyCommand {
    /// φ'(f(x) − f(x̄))·d(0, ∂f(x)) ≥ 1 on sampled points.
    Kl {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        phi: PhiArgs,
        #[command(flatten)]
        slice: SliceArgs,
    },
    /// d(x, S) ≤ factor·φ(f(x) − f_*) on sampled points.
    Growth {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        phi: PhiArgs,
        #[command(flatten)]
        slice: SliceArgs,
        #[arg(long, default_value_t = 1.0)]
        factor: f64,
    },
    /// Growth bound through proximal point path lengths.
    GrowthPpa {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        phi: PhiArgs,
        /// Start point of the proximal point runs.
        #[arg(long)]
        x: String,
        /// Comma-separated step sizes τ.
        #[arg(long, default_value = "1,0.1,0.01,0.001")]
        tau: String,
        /// Proximal point iterations per τ.
        #[arg(long, default_value_t = 1000)]
        k: usize,
    },
    /// Fitted Moreau envelope growth exponent against min{α, ½}.
    Moreau {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long)]
        xbar: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        r: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Δ_{k+1} = Δ_k − C·Δ_k^θ against C̃·(1+k)^{−1/(θ−1)}.
    Rate {
        #[arg(long, default_value_t = 1.0)]
        delta0: f64,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 10_000)]
        k: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
