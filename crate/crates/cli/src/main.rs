mod args;
mod commands;
mod error;
mod files;

use std::panic;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use cellcp::geodata::Frame;
use commands::Globals;
use error::CliError;

fn configure_threads(spec: &str) -> Result<(), CliError> {
    let n = match spec {
        "auto" => 0,
        s => match s.parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(CliError::Usage(format!("--threads expects a positive integer or `auto`, got {s:?}"))),
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(format!("cannot start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads(&cli.threads)?;
    let g = Globals {
        seed: cli.seed,
        frame: if cli.raw_degrees { Frame::RawDegrees } else { Frame::Equirectangular },
    };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a, &g),
        Command::Tune(a) => commands::tune(a, &g),
        Command::PredictMap(a) => commands::predict_map(a, &g),
        Command::UncertaintyMap(a) => commands::uncertainty_map(a, &g),
        Command::Evaluate(a) => commands::evaluate(a, &g),
        Command::Synth(a) => commands::synth(a, &g),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(1),
    }
}
