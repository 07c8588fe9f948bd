//! Command-line front end. `main.rs` only calls [`main_entry`].
//!
//! Exit codes: 0 success, 2 usage, data or domain errors, 3 numerical or
//! runtime failures. Diagnostic verdicts never change the exit code.

mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::models::{FactorConstraint, ModelSpec};

pub use commands::run;

#[derive(Debug, Parser)]
#[command(
    name = "copula-rank",
    version,
    about = "Efficiency bounds, diagnostics and rank-based estimation for structured Gaussian copula models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the Fisher information I(θ), the efficient information I*(θ) and I*(θ)⁻¹.
    Bound(PointArgs),
    /// Regularity, pseudo-likelihood efficiency and adaptivity diagnostics at θ.
    Check(CheckArgs),
    /// Estimate θ from a CSV data file (n rows, p columns, optional header).
    Estimate(EstimateArgs),
    /// Per-component asymptotic relative efficiency of the pseudo-likelihood estimator.
    Are(PointArgs),
    /// Run a Monte Carlo experiment described by a JSON config file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Unrestricted,
    Exchangeable,
    Toeplitz,
    Circular,
    Factor,
    AdaptivityDemo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Constraint {
    LowerTriangular,
    None,
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON model descriptor file, e.g. {"family": "toeplitz", "p": 4}.
    #[arg(long, conflicts_with_all = ["family", "p", "q", "constraint"])]
    pub model: Option<PathBuf>,
    /// Built-in model family.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Dimension p (not needed for circular and adaptivity-demo).
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of factors for the factor family.
    #[arg(long)]
    pub q: Option<usize>,
    /// Loading constraint for the factor family.
    #[arg(long, value_enum, default_value = "lower-triangular")]
    pub constraint: Option<Constraint>,
}

impl ModelArgs {
    pub fn spec(&self) -> Result<ModelSpec> {
        if let Some(path) = &self.model {
            return ModelSpec::from_path(path);
        }
        let family = self
            .family
            .ok_or_else(|| Error::config("family", "give --model FILE or --family"))?;
        let need_p = || self.p.ok_or_else(|| Error::config("p", "--p is required for this family"));
        Ok(match family {
            Family::Unrestricted => ModelSpec::Unrestricted { p: need_p()? },
            Family::Exchangeable => ModelSpec::Exchangeable { p: need_p()? },
            Family::Toeplitz => ModelSpec::Toeplitz { p: need_p()? },
            Family::Circular => ModelSpec::Circular,
            Family::AdaptivityDemo => ModelSpec::AdaptivityDemo,
            Family::Factor => ModelSpec::Factor {
                p: need_p()?,
                q: self.q.ok_or_else(|| Error::config("q", "--q is required for the factor family"))?,
                constraint: match self.constraint {
                    Some(Constraint::None) => FactorConstraint::None,
                    _ => FactorConstraint::LowerTriangular,
                },
            },
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "pretty")]
    pub format: Format,
}

#[derive(Debug, Clone, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter values separated by spaces or commas. For unrestricted
    /// models list the strict lower triangle by rows: r21 r31 r32 r41 …
    /// For factor models list the free loadings row by row.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: String,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub point: PointArgs,
    /// Relative tolerance of the span test: residual ≤ tol·(1 + ‖M‖).
    #[arg(long, default_value_t = crate::numcore::DEFAULT_SPAN_TOL)]
    pub tol: f64,
    /// Absolute tolerance for the diagonal and trace conditions.
    #[arg(long, default_value_t = crate::geometry::DEFAULT_DIAG_TOL)]
    pub diag_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Ple,
    OneStep,
    Pilot,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// CSV file with one observation per row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "one-step")]
    pub method: MethodArg,
    /// Apply the one-step update twice.
    #[arg(long)]
    pub iterate_twice: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the output directory from the config.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (default: config, then COPULA_RANK_WORKERS, then all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Override the number of replications.
    #[arg(long)]
    pub replications: Option<usize>,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// Parses a parameter list such as "0.49 -0.45,-0.84".
pub fn parse_theta(text: &str) -> Result<Vec<f64>> {
    let vals: Vec<f64> = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::config("theta", format!("`{s}` is not a number")))
        })
        .collect::<Result<_>>()?;
    if vals.is_empty() {
        return Err(Error::config("theta", "no values given"));
    }
    Ok(vals)
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out) {
        Ok(()) => {
            let _ = out.flush();
            0
        }
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            if let Error::NonConvergence { trace, .. } = &e {
                for line in trace {
                    eprintln!("  {line}");
                }
            }
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_lists() {
        assert_eq!(parse_theta("0.5").unwrap(), vec![0.5]);
        assert_eq!(parse_theta(" 0.1, -0.2  0.3 ").unwrap(), vec![0.1, -0.2, 0.3]);
        assert!(parse_theta("").is_err());
        assert!(parse_theta("0.1 x").is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
