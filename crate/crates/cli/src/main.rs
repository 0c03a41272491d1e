//! `markov-uq`: constants, entropy rates, bounds and Monte Carlo checks
//! from the command line.

mod commands;
mod config;
mod resolve;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use markov_uq::{ErrorClass, UqError};

use config::RunArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Uq(#[from] UqError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 model or input, 3 numeric, 4 no certified method.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Uq(e) => match e.class() {
                ErrorClass::Model => 2,
                ErrorClass::Numeric => 3,
                ErrorClass::NoMethod => 4,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "markov-uq", version, about = "Certified bias bounds for ergodic averages of Markov models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Poincaré / log-Sobolev constants and Bernstein parameters.
    Constants(RunArgs),
    /// Two-sided bound on the bias of the ergodic average.
    Bound(RunArgs),
    /// Relative-entropy rate between the model and an alternative.
    Relent(RunArgs),
    /// Compare the bound with a Monte Carlo estimate of the bias.
    Validate(RunArgs),
    /// List the built-in models.
    ZooList,
}

fn write_file(path: &std::path::Path, body: &str) -> Result<(), CliError> {
    std::fs::write(path, body).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let (name, args) = match cli.command {
        Command::ZooList => {
            let out = commands::zoo_list();
            println!("{}", serde_json::to_string_pretty(&out.json).expect("json"));
            return Ok(0);
        }
        Command::Constants(a) => ("constants", a),
        Command::Bound(a) => ("bound", a),
        Command::Relent(a) => ("relent", a),
        Command::Validate(a) => ("validate", a),
    };
    let args = args.resolve(name)?;
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot configure threads: {e}")))?;
    }
    let out = match name {
        "constants" => commands::constants(&args)?,
        "bound" => commands::bound(&args)?,
        "relent" => commands::relent(&args)?,
        _ => commands::validate(&args)?,
    };
    let text = serde_json::to_string_pretty(&out.json).expect("json") + "\n";
    match &args.out {
        Some(p) => write_file(p, &text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(text.as_bytes());
        }
    }
    if let (Some(p), Some(body)) = (&args.csv, &out.csv) {
        write_file(p, body)?;
    }
    Ok(out.code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
