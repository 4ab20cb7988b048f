use std::process::ExitCode;

use clap::Parser;
use terracover_cli::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.lines().next().unwrap_or("unknown failure"));
            ExitCode::FAILURE
        }
    }
}
