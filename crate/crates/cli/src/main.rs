//! `perispec`: spectra of periodic and perturbed operators on periodic graphs.
//!
//! Exit status is 0 on success, 1 when the computation rejects its input
//! (the message starts with the error name), and 2 on usage errors.

mod commands;
mod svg;

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "perispec",
    version,
    about = "Spectra of operators on periodic graphs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the graph axioms and print a summary.
    Validate(Input),
    /// Print the symbol terms r(β) of a periodic operator.
    Symbol(Input),
    /// Certified spectral bands of a periodic self-adjoint operator.
    Bands(Input),
    /// Dispersion curves on the torus grid as CSV.
    Curves(Input),
    /// Essential spectrum from the limit operators.
    Ess(Input),
    /// Gaps of the essential spectrum inside `--window LO,HI`.
    Gaps(Input),
    /// Decide whether A − λI is Fredholm.
    Fredholm(Input),
    /// Essential spectrum of the three-particle model.
    Threeparticle(Input),
    /// Eigenvalues of the truncation to the cube of radius `--window R`.
    FiniteSection(Input),
}

#[derive(Args, Debug, Clone)]
#[command(group(ArgGroup::new("source").required(true).args(["builtin", "graph"])))]
pub struct Input {
    /// Built-in graph: cayley, zigzag or honeycomb.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Lattice rank for `--builtin cayley`.
    #[arg(short = 'n', default_value_t = 1)]
    pub n: usize,
    /// Graph description file (TOML).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Potential file (TOML); the operator is Δ + v. For `threeparticle`, the
    /// radial profiles w1, w2, w12.
    #[arg(long)]
    pub potential: Option<PathBuf>,
    /// Grid points per torus axis.
    #[arg(long, default_value_t = 256, value_parser = clap::value_parser!(u64).range(2..))]
    pub grid: u64,
    /// Certification tolerance.
    #[arg(long, default_value_t = 1e-6, value_parser = positive)]
    pub tol: f64,
    /// `gaps`: LO,HI. `finite-section`: R. `threeparticle`: R or a schedule R1,R2,…
    #[arg(long, allow_hyphen_values = true, value_parser = numbers)]
    pub window: Option<Numbers>,
    /// Spectral parameter RE[,IM] for `fredholm`.
    #[arg(long, allow_hyphen_values = true, value_parser = numbers)]
    pub lambda: Option<Numbers>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also draw the result as an SVG figure.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// `finite-section`: dump the window matrix to this file.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

/// A comma-separated list of numbers such as `-2,6`.
#[derive(Debug, Clone, PartialEq)]
pub struct Numbers(pub Vec<f64>);

fn numbers(s: &str) -> Result<Numbers, String> {
    s.split(',')
        .map(|p| match p.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            Ok(_) => Err(format!("'{p}' is not finite")),
            Err(e) => Err(format!("'{p}': {e}")),
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Numbers)
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Domain(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

fn write_file(path: &PathBuf, flag: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Usage(format!("{flag} {}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let input = match &cli.command {
        Command::Validate(i)
        | Command::Symbol(i)
        | Command::Bands(i)
        | Command::Curves(i)
        | Command::Ess(i)
        | Command::Gaps(i)
        | Command::Fredholm(i)
        | Command::Threeparticle(i)
        | Command::FiniteSection(i) => i.clone(),
    };
    let output = commands::execute(&cli.command, &input)?;
    match &input.out {
        Some(path) => write_file(path, "--out", output.report.as_bytes())?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(output.report.as_bytes())
                .map_err(|e| CliError::Domain(format!("Io: {e}")))?;
        }
    }
    if let Some(path) = &input.svg {
        let figure = output
            .figure
            .ok_or_else(|| CliError::Usage("--svg is not available for this command".into()))?;
        write_file(path, "--svg", figure.as_bytes())?;
    }
    if let (Some(path), Some(dump)) = (&input.dump, output.dump) {
        write_file(path, "--dump", &dump)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Usage(m) => eprintln!("usage error: {m}"),
                CliError::Domain(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}
