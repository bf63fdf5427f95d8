//! `qsynth`: check, synthesize and analyze linear quantum stochastic systems.

mod analyze;
mod check;
mod load;
mod report;
mod synth;

use clap::{Parser, Subcommand, ValueEnum};
use load::UsageError;
use serde_json::Value;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qsynth", version, about = "Physical realizability and H-infinity synthesis for linear quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Commutation preservation and physical realizability of a plant,
    /// system or controller file.
    Check {
        file: PathBuf,
        /// Report the Hamiltonian matrix R and coupling Λ.
        #[arg(long)]
        extract: bool,
        /// Report the augmented system when Θ is degenerate.
        #[arg(long)]
        augment: bool,
    },
    /// Two-Riccati H∞ synthesis with optional physical realization.
    Synthesize {
        plant: PathBuf,
        /// Disturbance attenuation level.
        #[arg(long, required_unless_present = "sweep")]
        g: Option<f64>,
        /// quantum, classical or mixed:N (N classical controller variables).
        #[arg(long)]
        realize: Option<synth::Realize>,
        /// Write the realized controller here.
        #[arg(long, requires = "realize")]
        out: Option<PathBuf>,
        /// Bisect the smallest feasible g in LO,HI to three significant digits.
        #[arg(long, value_name = "LO,HI", value_parser = parse_range)]
        sweep: Option<(f64, f64)>,
    },
    /// Closed-loop analysis of a plant with a controller file, or with the
    /// controller synthesized at --g.
    Analyze {
        #[arg(value_enum)]
        what: Analysis,
        plant: PathBuf,
        /// Attenuation level used for synthesis and as the bounded-real level.
        #[arg(long)]
        g: f64,
        #[arg(long)]
        controller: Option<PathBuf>,
        /// Piecewise-constant disturbance for `simulate`.
        #[arg(long)]
        signal: Option<PathBuf>,
        /// Time step for `simulate`.
        #[arg(long)]
        dt: Option<f64>,
        /// CSV destination for `simulate` (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Structured samples of Δ for `robust`.
        #[arg(long, default_value_t = 11)]
        grid: usize,
        /// Random samples of Δ for `robust`.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    Norm,
    Sbr,
    Robust,
    Simulate,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number {hi:?}"))?;
    if !(0.0 < lo && lo < hi) {
        return Err("need 0 < LO < HI".into());
    }
    Ok((lo, hi))
}

/// What a command prints, and whether every check it ran passed.
pub enum Output {
    Report(Value, bool),
    Text(String, bool),
}

impl From<(Value, bool)> for Output {
    fn from((v, pass): (Value, bool)) -> Self {
        Output::Report(v, pass)
    }
}

type Outcome = Result<Output, UsageError>;

fn run(cli: Cli) -> Outcome {
    let tol = load::tolerances()?;
    match cli.command {
        Command::Check { file, extract, augment } => check::run(&file, extract, augment, &tol).map(Output::from),
        Command::Synthesize { plant, g, realize, out, sweep } => {
            synth::run(&plant, g, realize, out.as_deref(), sweep, &tol).map(Output::from)
        }
        Command::Analyze { what, plant, g, controller, signal, dt, out, grid, samples, seed } => {
            if !(g > 0.0) {
                return Err(UsageError("--g must be positive".into()));
            }
            let setup = analyze::Setup::new(&plant, g, controller.as_deref(), &tol)?;
            let setup = match setup {
                Ok(s) => s,
                Err(failed) => return Ok(failed.into()),
            };
            match what {
                Analysis::Norm => Ok(analyze::norm(&setup).into()),
                Analysis::Sbr => Ok(analyze::sbr(&setup, &tol).into()),
                Analysis::Robust => analyze::robust(&setup, grid, samples, seed, &tol).map(Output::from),
                Analysis::Simulate => {
                    let signal = signal.ok_or_else(|| UsageError("simulate needs --signal".into()))?;
                    analyze::simulate(&setup, &signal, dt, out.as_deref(), &tol)
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            let pass = match out {
                Output::Report(report, pass) => {
                    print!("{}", qsynth::io::to_pretty(&report));
                    pass
                }
                Output::Text(text, pass) => {
                    print!("{text}");
                    pass
                }
            };
            if pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("0.01, 1"), Ok((0.01, 1.0)));
        assert!(parse_range("1,0.5").is_err());
        assert!(parse_range("0,1").is_err());
        assert!(parse_range("0.1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
