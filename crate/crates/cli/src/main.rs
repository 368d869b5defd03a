//! `charweb`: check diagonal systems, generate families, solve them and test
//! their characteristic webs.
//!
//! Exit codes: 0 success (a negative verdict is still a success), 2 bad input
//! or any other failure, 3 too few usable sample points, 4 every requested
//! grid row lies past breaking, 5 a 3-web was given to the E, F, G, H solve.

mod check;
mod output;
mod solve;
mod web;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::Failure;

#[derive(Parser)]
#[command(
    name = "charweb",
    version,
    about = "Linearizable characteristic webs of diagonal systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    options: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a system file: conditions, verdicts, residual histograms.
    Check {
        /// System JSON.
        input: PathBuf,
    },
    /// Build a family file into a system file with its conservation pairs.
    Generate {
        /// Family JSON.
        input: PathBuf,
    },
    /// Solve a system from initial data on `--grid` over `--domain`.
    Solve {
        /// System JSON (possibly written by `generate`).
        input: PathBuf,
        /// Initial data JSON.
        #[arg(long)]
        data: PathBuf,
    },
    /// Hénaut residuals and leaf straightness of a web.
    Web {
        /// Solution CSV (with `--system`) or slope-field JSON.
        input: PathBuf,
        /// System JSON the solution belongs to.
        #[arg(long)]
        system: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Options {
    /// Residual tolerance.
    #[arg(long, global = true, default_value_t = 1e-7)]
    pub tol: f64,
    /// Sample points drawn from the box.
    #[arg(long, global = true, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Node counts `nt,nx`.
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<[usize; 2]>,
    /// `t0,t1,x0,x1`.
    #[arg(long, global = true, value_parser = parse_domain, allow_hyphen_values = true)]
    pub domain: Option<[f64; 4]>,
    /// Transport step.
    #[arg(long = "step-h", global = true, default_value_t = 1e-3)]
    pub step_h: f64,
    /// Directory for output files; without it only the report is printed.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Comma-separated output formats (default: all).
    #[arg(long, global = true, value_delimiter = ',')]
    pub format: Vec<Format>,
}

impl Options {
    pub fn wants(&self, f: Format) -> bool {
        self.format.is_empty() || self.format.contains(&f)
    }
}

/// Everything that determines a run; echoed at the top of every report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: &'static str,
    pub input: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<PathBuf>,
    #[serde(flatten)]
    pub options: Options,
}

fn parse_grid(s: &str) -> Result<[usize; 2], String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [nt, nx] if *nt >= 2 && *nx >= 2 => Ok([*nt, *nx]),
        _ => Err("expected nt,nx with both at least 2".into()),
    }
}

fn parse_domain(s: &str) -> Result<[f64; 4], String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [t0, t1, x0, x1] if t0 < t1 && x0 < x1 => Ok([*t0, *t1, *x0, *x1]),
        _ => Err("expected t0,t1,x0,x1 with t0 < t1 and x0 < x1".into()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let options = cli.options;
    let config = |subcommand, input: PathBuf, data, system| RunConfig {
        subcommand,
        input,
        data,
        system,
        options: options.clone(),
    };
    match cli.command {
        Command::Check { input } => check::run(&config("check", input, None, None)),
        Command::Generate { input } => check::generate(&config("generate", input, None, None)),
        Command::Solve { input, data } => solve::run(&config("solve", input, Some(data), None)),
        Command::Web { input, system } => web::run(&config("web", input, None, system)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("charweb: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
