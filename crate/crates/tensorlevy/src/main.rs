use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tensorlevy::{run, CliError, Command, DriftChoice, Overrides};

#[derive(Parser)]
#[command(name = "tensorlevy", version, about = "Moments, limit theorems, positivity and Fock/QSDE experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// JSON config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for random sources.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the degree (the moment-matrix order for `positivity`).
    #[arg(long, global = true)]
    degree: Option<usize>,
    #[arg(long, global = true, value_enum)]
    drift: Option<DriftArg>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Gaussian moments and their generator on words.
    Moments,
    /// Central limit sweep over a doubling schedule.
    Clt,
    /// Positivity of the convolution semigroup of a generator.
    Positivity,
    /// Fock vacuum moments against the convolution exponential.
    FockMoments,
    /// Discretized unitary evolution: defects and vacuum errors.
    Qsde,
    /// Subcoalgebra generated by a set of polynomials.
    Subcoalgebra,
}

#[derive(ValueEnum, Clone, Copy)]
enum DriftArg {
    Consistent,
    PaperLiteral,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Moments => Command::Moments,
        Cmd::Clt => Command::Clt,
        Cmd::Positivity => Command::Positivity,
        Cmd::FockMoments => Command::FockMoments,
        Cmd::Qsde => Command::Qsde,
        Cmd::Subcoalgebra => Command::Subcoalgebra,
    };
    let overrides = Overrides {
        seed: cli.seed,
        degree: cli.degree,
        drift: cli.drift.map(|d| match d {
            DriftArg::Consistent => DriftChoice::Consistent,
            DriftArg::PaperLiteral => DriftChoice::PaperLiteral,
        }),
    };
    let result = (|| {
        let config = match &cli.config {
            Some(path) => std::fs::read_to_string(path)?,
            None => "{}".to_string(),
        };
        let output = run(command, &config, overrides)?;
        match &cli.out {
            Some(path) => std::fs::write(path, &output.body)?,
            None => print!("{}", output.body),
        }
        Ok::<_, CliError>(output.failures)
    })();
    match result {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in failures {
                eprintln!("tolerance failure: {f}");
            }
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
